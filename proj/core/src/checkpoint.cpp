#include "hgad/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

namespace {
constexpr const char* kFormatTag = "hgad-checkpoint";
constexpr int kFormatVersion = 1;
}  // namespace

void Checkpoint::save(const std::string& path) const {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& e : params.schema.entries) {
        vars.push_back({{"name", e.name}, {"kind", to_string(e.kind)}});
    }
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, t] : params.named_parameters()) {
        tensors[name] = {{"shape", t->shape()}, {"values", t->values}};
    }
    nlohmann::json j{
        {"format", kFormatTag},
        {"version", kFormatVersion},
        {"schema", {{"variables", vars}}},
        {"dims",
         {{"window", params.dims.window},
          {"proj_dim", params.dims.proj_dim},
          {"out_dim", params.dims.out_dim},
          {"heads", params.dims.heads}}},
        {"ablation",
         {{"disable_embed_sim", params.ablation.disable_embed_sim},
          {"disable_feat_sim", params.ablation.disable_feat_sim},
          {"disable_discrete_channel", params.ablation.disable_discrete_channel},
          {"disable_continuous_channel", params.ablation.disable_continuous_channel},
          {"disable_hybrid_channel", params.ablation.disable_hybrid_channel}}},
        {"normalizer", {{"min", normalizer.min_v}, {"max", normalizer.max_v}}},
        {"calibration",
         {{"source", to_string(calibration.source)},
          {"median", calibration.median},
          {"iqr", calibration.iqr},
          {"windows", calibration.n_windows}}},
        {"params", tensors}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << j.dump();
    if (!out) throw IoError("write failed for checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != kFormatTag) {
        throw DataError("checkpoint " + path + " has unknown format tag");
    }
    if (j.value("version", 0) != kFormatVersion) {
        throw DataError("checkpoint " + path + " has unsupported version " +
                        std::to_string(j.value("version", 0)));
    }

    Checkpoint ckpt;
    VariableSchema schema;
    for (const auto& v : j.at("schema").at("variables")) {
        schema.entries.push_back(
            {v.at("name").get<std::string>(),
             variable_kind_from_string(v.at("kind").get<std::string>())});
    }
    schema.validate();

    ModelDims dims;
    dims.window = j.at("dims").at("window").get<std::size_t>();
    dims.proj_dim = j.at("dims").at("proj_dim").get<std::size_t>();
    dims.out_dim = j.at("dims").at("out_dim").get<std::size_t>();
    dims.heads = j.at("dims").at("heads").get<std::size_t>();

    AblationFlags ablation;
    const auto& abl = j.at("ablation");
    ablation.disable_embed_sim = abl.at("disable_embed_sim").get<bool>();
    ablation.disable_feat_sim = abl.at("disable_feat_sim").get<bool>();
    ablation.disable_discrete_channel = abl.at("disable_discrete_channel").get<bool>();
    ablation.disable_continuous_channel = abl.at("disable_continuous_channel").get<bool>();
    ablation.disable_hybrid_channel = abl.at("disable_hybrid_channel").get<bool>();

    std::mt19937_64 rng(0);
    ckpt.params = ModelParams::init(schema, dims, ablation, rng);
    for (auto& [name, tensor] : ckpt.params.named_parameters()) {
        if (!j.at("params").contains(name)) {
            throw DataError("checkpoint " + path + " is missing parameter '" + name + "'");
        }
        const auto& entry = j["params"][name];
        const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        auto values = entry.at("values").get<std::vector<double>>();
        if (shape != tensor->shape() || values.size() != tensor->size()) {
            throw DataError("checkpoint " + path + " parameter '" + name +
                            "' has unexpected shape");
        }
        tensor->values = std::move(values);
    }

    ckpt.normalizer.min_v = j.at("normalizer").at("min").get<std::vector<double>>();
    ckpt.normalizer.max_v = j.at("normalizer").at("max").get<std::vector<double>>();
    if (ckpt.normalizer.min_v.size() != schema.size() ||
        ckpt.normalizer.max_v.size() != schema.size()) {
        throw DataError("checkpoint " + path + " normalizer does not match schema");
    }

    const auto& cal = j.at("calibration");
    ckpt.calibration.source = calibration_source_from_string(cal.at("source").get<std::string>());
    ckpt.calibration.median = cal.at("median").get<std::vector<double>>();
    ckpt.calibration.iqr = cal.at("iqr").get<std::vector<double>>();
    ckpt.calibration.n_windows = cal.at("windows").get<std::size_t>();
    if (ckpt.calibration.median.size() != schema.size() ||
        ckpt.calibration.iqr.size() != schema.size()) {
        throw DataError("checkpoint " + path + " calibration does not match schema");
    }
    return ckpt;
}

}  // namespace hgad
