// Training loop: AdamW + schedule + clipping, per-epoch validation
// perplexity, metrics CSV, and checkpointing.
#pragma once

#include "gamlab/data.hpp"
#include "gamlab/optim.hpp"

#include <string>
#include <vector>

namespace gamlab {

struct MetricsRow {
    int64_t epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
    double val_ppl = 0;
    double epoch_seconds = 0;  // training time only; evaluation excluded
};

struct EvalResult {
    double loss = 0;
    double ppl = 0;
};

// Mean token cross-entropy over every validation chunk (Eval mode, partial
// final batch kept); ppl = exp(loss).
EvalResult evaluate(LmModel<float>& model, const TokenDataset& data, int64_t batch_size);

struct TrainResult {
    std::vector<MetricsRow> metrics;
    double best_val_loss = 0;
    int64_t total_steps = 0;
};

// Full run. Writes metrics.csv plus checkpoint_final.gamc and
// checkpoint_best.gamc under out_dir when it is non-empty; progress lines go
// to stderr. Aborts with NumericError (step / lr / grad-norm diagnostics) if
// the loss stops being finite.
TrainResult train(LmModel<float>& model, const TokenDataset& train_data,
                  const TokenDataset& val_data, const TrainConfig& cfg,
                  const std::string& out_dir);

// Metrics CSV: header epoch,train_loss,val_loss,val_ppl,epoch_seconds.
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

} // namespace gamlab
