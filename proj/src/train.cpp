#include "gamlab/train.hpp"

#include "gamlab/checkpoint.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace gamlab {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}
} // namespace

EvalResult evaluate(LmModel<float>& model, const TokenDataset& data, int64_t batch_size) {
    Xoshiro256 rng(0);  // unused in Eval mode
    BatchIter iter(data, batch_size, /*shuffle=*/false, /*seed=*/0, /*epoch=*/0,
                   /*drop_last=*/false);
    IntTensor batch;
    double loss_sum = 0.0;
    int64_t positions = 0;
    while (iter.next(batch)) {
        Tensor<float> loss = model.loss(batch, Mode::Eval, rng);
        const int64_t batch_positions = batch.shape[0] * (batch.shape[1] - 1);
        loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch_positions);
        positions += batch_positions;
    }
    if (positions == 0) throw InputError("evaluate: validation set has no chunks");
    EvalResult r;
    r.loss = loss_sum / static_cast<double>(positions);
    r.ppl = std::exp(r.loss);
    return r;
}

TrainResult train(LmModel<float>& model, const TokenDataset& train_data,
                  const TokenDataset& val_data, const TrainConfig& cfg,
                  const std::string& out_dir) {
    cfg.validate();
    const int64_t steps_per_epoch =
        BatchIter(train_data, cfg.batch_size, false, 0, 0, /*drop_last=*/true).batches();
    if (steps_per_epoch == 0)
        throw InputError("train: training set smaller than one batch");
    const int64_t total_steps = cfg.epochs * steps_per_epoch;
    if (total_steps <= cfg.warmup_steps)
        throw ConfigError(str_cat("train: total steps ", total_steps,
                                  " do not exceed warmup_steps ", cfg.warmup_steps));

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    auto params = model.parameters();
    AdamW<float> opt(params, cfg);
    Xoshiro256 dropout_rng(derive_seed(cfg.seed, 0x64726f70ULL));

    TrainResult result;
    result.total_steps = total_steps;
    result.best_val_loss = std::numeric_limits<double>::infinity();

    int64_t step = 0;
    const int64_t log_every = std::max<int64_t>(1, steps_per_epoch / 5);
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        BatchIter iter(train_data, cfg.batch_size, /*shuffle=*/true, cfg.seed, epoch,
                       /*drop_last=*/true);
        IntTensor batch;
        double epoch_loss_sum = 0.0;
        int64_t epoch_batches = 0;
        const auto t0 = Clock::now();
        while (iter.next(batch)) {
            const double lr = lr_at(step + 1, total_steps, cfg);
            double loss_v = 0, grad_norm = 0;
            try {
                Tape<float> tape;
                typename Tape<float>::Scope scope(tape);
                Tensor<float> loss = model.loss(batch, Mode::Train, dropout_rng);
                loss_v = static_cast<double>(loss.item());
                backward(loss);
                grad_norm = clip_grad_norm(params, cfg.clip_norm);
            } catch (const NumericError& e) {
                throw NumericError(str_cat("train: aborted at step ", step, " (lr ", lr,
                                           "): ", e.what()));
            }
            if (!std::isfinite(loss_v))
                throw NumericError(str_cat("train: non-finite loss at step ", step, " (lr ", lr,
                                           ", grad norm ", grad_norm, ")"));
            opt.step(params, lr);
            for (auto& p : params) p.tensor.zero_grad();

            epoch_loss_sum += loss_v;
            ++epoch_batches;
            ++step;
            if (step % log_every == 0)
                std::cerr << "epoch " << (epoch + 1) << "/" << cfg.epochs << " step " << step << "/"
                          << total_steps << " loss " << loss_v << " lr " << lr << "\n";
        }
        const double epoch_seconds = seconds_since(t0);

        EvalResult ev = evaluate(model, val_data, cfg.batch_size);
        MetricsRow row;
        row.epoch = epoch + 1;
        row.train_loss = epoch_loss_sum / static_cast<double>(epoch_batches);
        row.val_loss = ev.loss;
        row.val_ppl = ev.ppl;
        row.epoch_seconds = epoch_seconds;
        result.metrics.push_back(row);
        std::cerr << "epoch " << row.epoch << " done: train_loss " << row.train_loss << " val_loss "
                  << row.val_loss << " val_ppl " << row.val_ppl << " (" << row.epoch_seconds
                  << "s)\n";

        if (!out_dir.empty()) {
            write_metrics_csv(out_dir + "/metrics.csv", result.metrics);
            save_checkpoint(out_dir + "/checkpoint_final.gamc", model);
            if (ev.loss < result.best_val_loss)
                save_checkpoint(out_dir + "/checkpoint_best.gamc", model);
        }
        result.best_val_loss = std::min(result.best_val_loss, ev.loss);
    }
    return result;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for writing: ", path));
    out << "epoch,train_loss,val_loss,val_ppl,epoch_seconds\n";
    out.precision(10);
    for (const auto& r : rows)
        out << r.epoch << "," << r.train_loss << "," << r.val_loss << "," << r.val_ppl << ","
            << r.epoch_seconds << "\n";
    if (!out) throw IoError(str_cat("write failed: ", path));
}

} // namespace gamlab
