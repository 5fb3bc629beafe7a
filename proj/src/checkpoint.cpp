#include "gamlab/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace gamlab {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'M', 'C'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw ParseError(str_cat("checkpoint ", path, ": truncated"));
    return v;
}

void write_str(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::ifstream& in, const std::string& path) {
    uint32_t len = read_u32(in, path);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw ParseError(str_cat("checkpoint ", path, ": truncated"));
    return s;
}

} // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["arch"] = arch_name(cfg.arch);
    j["variant"] = variant_name(cfg.variant);
    j["vocab_size"] = cfg.vocab_size;
    j["block_size"] = cfg.block_size;
    j["d_model"] = cfg.d_model;
    j["n_layers"] = cfg.n_layers;
    j["num_slots"] = cfg.num_slots;
    j["kernel_size"] = cfg.kernel_size;
    j["n_head"] = cfg.n_head;
    j["dropout"] = cfg.dropout;
    j["seed"] = cfg.seed;
    return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(str_cat("model config: ", e.what()));
    }
    static const char* known[] = {"arch",      "variant",     "vocab_size", "block_size",
                                  "d_model",   "n_layers",    "num_slots",  "kernel_size",
                                  "n_head",    "dropout",     "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(str_cat("model config: unknown key '", it.key(), "'"));
    }
    ModelConfig cfg;
    if (j.contains("arch")) cfg.arch = arch_from_name(j["arch"].get<std::string>());
    if (j.contains("variant")) cfg.variant = variant_from_name(j["variant"].get<std::string>());
    if (j.contains("vocab_size")) cfg.vocab_size = j["vocab_size"].get<int64_t>();
    if (j.contains("block_size")) cfg.block_size = j["block_size"].get<int64_t>();
    if (j.contains("d_model")) cfg.d_model = j["d_model"].get<int64_t>();
    if (j.contains("n_layers")) cfg.n_layers = j["n_layers"].get<int64_t>();
    if (j.contains("num_slots")) cfg.num_slots = j["num_slots"].get<int64_t>();
    if (j.contains("kernel_size")) cfg.kernel_size = j["kernel_size"].get<int64_t>();
    if (j.contains("n_head")) cfg.n_head = j["n_head"].get<int64_t>();
    if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    cfg.validate();
    return cfg;
}

void save_checkpoint(const std::string& path, LmModel<float>& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(str_cat("cannot open for writing: ", path));
    out.write(kMagic, sizeof(kMagic));
    write_u32(out, kVersion);
    write_str(out, model_config_to_json(model.config()));
    for (auto& p : model.parameters()) {
        write_str(out, p.name);
        write_u32(out, static_cast<uint32_t>(p.tensor.rank()));
        for (int64_t i = 0; i < p.tensor.rank(); ++i)
            write_u32(out, static_cast<uint32_t>(p.tensor.dim(i)));
        out.write(reinterpret_cast<const char*>(p.tensor.data()),
                  static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(p.tensor.numel())));
    }
    if (!out) throw IoError(str_cat("write failed: ", path));
}

LmModel<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(str_cat("cannot open: ", path));
    char magic[4];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ParseError(str_cat("checkpoint ", path, ": bad magic"));
    uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw ParseError(str_cat("checkpoint ", path, ": unsupported version ", version));

    ModelConfig cfg = model_config_from_json(read_str(in, path));
    LmModel<float> model(cfg);

    auto params = model.parameters();
    std::vector<bool> filled(params.size(), false);
    for (size_t rec = 0; rec < params.size(); ++rec) {
        const std::string name = read_str(in, path);
        uint32_t rank = read_u32(in, path);
        Shape dims(rank);
        for (uint32_t i = 0; i < rank; ++i) dims[i] = read_u32(in, path);

        size_t idx = params.size();
        for (size_t i = 0; i < params.size(); ++i)
            if (!filled[i] && params[i].name == name) {
                idx = i;
                break;
            }
        if (idx == params.size())
            throw ParseError(str_cat("checkpoint ", path, ": unexpected or duplicate parameter '",
                                     name, "'"));
        if (!shape_eq(dims, params[idx].tensor.shape()))
            throw ParseError(str_cat("checkpoint ", path, ": parameter '", name, "' has shape ",
                                     shape_str(dims), ", expected ",
                                     shape_str(params[idx].tensor.shape())));
        in.read(reinterpret_cast<char*>(params[idx].tensor.data()),
                static_cast<std::streamsize>(sizeof(float) *
                                             static_cast<size_t>(params[idx].tensor.numel())));
        if (!in) throw ParseError(str_cat("checkpoint ", path, ": truncated data for '", name, "'"));
        filled[idx] = true;
    }
    for (size_t i = 0; i < params.size(); ++i)
        if (!filled[i])
            throw ParseError(str_cat("checkpoint ", path, ": missing parameter '", params[i].name, "'"));
    return model;
}

} // namespace gamlab
