// hgad: graph-attention anomaly detection for mixed continuous/discrete
// sensor series. Subcommands: synth, train, detect, localize, ablate.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hgad/checkpoint.hpp"
#include "hgad/detector.hpp"
#include "hgad/error.hpp"
#include "hgad/model.hpp"
#include "hgad/series.hpp"
#include "hgad/synth.hpp"
#include "hgad/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitIo = 5;

struct CommonArgs {
    std::string config_path;
    std::string output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> window;
    std::optional<std::size_t> heads;
    std::optional<double> mask_p;
    std::string ablate;  // comma-separated toggles, overrides config
};

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hgad::IoError("cannot open config file: " + path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw hgad::ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
}

std::string resolve_output_dir(const CommonArgs& args, const json& config) {
    if (!args.output_dir.empty()) return args.output_dir;
    if (config.contains("output_dir")) return config["output_dir"].get<std::string>();
    if (const char* env = std::getenv("HGAD_OUTPUT_DIR")) return env;
    return ".";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw hgad::IoError("cannot create output directory " + dir + ": " + ec.message());
}

hgad::SynthConfig synth_config_from(const json& root) {
    const json& j = root.contains("synth") ? root["synth"] : root;
    hgad::SynthConfig config;
    config.n_continuous = j.value("n_continuous", config.n_continuous);
    config.n_discrete = j.value("n_discrete", config.n_discrete);
    config.t_train = j.value("t_train", config.t_train);
    config.t_test = j.value("t_test", config.t_test);
    config.noise_std = j.value("noise_std", config.noise_std);
    config.seed = j.value("seed", config.seed);
    config.anomaly_rate = j.value("anomaly_rate", config.anomaly_rate);
    if (j.contains("kinds")) {
        config.kinds.clear();
        for (const auto& k : j["kinds"]) {
            config.kinds.push_back(hgad::anomaly_kind_from_string(k.get<std::string>()));
        }
    }
    if (j.contains("segments")) {
        for (const auto& s : j["segments"]) {
            hgad::AnomalySegment seg;
            seg.kind = hgad::anomaly_kind_from_string(s.at("kind").get<std::string>());
            seg.variable = s.at("variable").get<std::size_t>();
            seg.start = s.at("start").get<std::size_t>();
            seg.length = s.at("length").get<std::size_t>();
            seg.magnitude = s.value("magnitude", seg.magnitude);
            config.segments.push_back(seg);
        }
    }
    config.validate();
    return config;
}

hgad::TrainConfig train_config_from(const json& root, const CommonArgs& args) {
    hgad::TrainConfig config;
    if (root.contains("train")) {
        const json& j = root["train"];
        config.dims.window = j.value("window", config.dims.window);
        config.dims.proj_dim = j.value("proj_dim", config.dims.proj_dim);
        config.dims.out_dim = j.value("out_dim", config.dims.out_dim);
        config.dims.heads = j.value("heads", config.dims.heads);
        config.learning_rate = j.value("learning_rate", config.learning_rate);
        config.batch_size = j.value("batch_size", config.batch_size);
        config.max_epochs = j.value("max_epochs", config.max_epochs);
        config.loss_floor = j.value("loss_floor", config.loss_floor);
        config.floor_patience = j.value("floor_patience", config.floor_patience);
        config.val_patience = j.value("val_patience", config.val_patience);
        config.mask_p = j.value("mask_p", config.mask_p);
        if (j.contains("ablate")) {
            config.ablation = hgad::AblationFlags::parse(j["ablate"].get<std::string>());
        }
    }
    config.seed = root.value("seed", config.seed);
    if (args.seed) config.seed = *args.seed;
    if (args.window) config.dims.window = *args.window;
    if (args.heads) config.dims.heads = *args.heads;
    if (args.mask_p) config.mask_p = *args.mask_p;
    if (!args.ablate.empty()) config.ablation = hgad::AblationFlags::parse(args.ablate);
    config.validate();
    return config;
}

struct PipelineFiles {
    std::string schema;
    std::string train_csv;
    std::string test_csv;
    std::string checkpoint;
};

PipelineFiles pipeline_files(const json& config, const std::string& out_dir) {
    PipelineFiles f;
    f.schema = config.value("schema", (fs::path(out_dir) / "schema.json").string());
    f.train_csv = config.value("train_csv", (fs::path(out_dir) / "train.csv").string());
    f.test_csv = config.value("test_csv", (fs::path(out_dir) / "test.csv").string());
    f.checkpoint = config.value("checkpoint", (fs::path(out_dir) / "checkpoint.json").string());
    return f;
}

int cmd_synth(const CommonArgs& args) {
    const json config = load_json_file(args.config_path);
    const std::string out_dir = resolve_output_dir(args, config);
    ensure_dir(out_dir);
    hgad::SynthConfig synth = synth_config_from(config);
    synth.seed = args.seed.value_or(synth.seed);

    const auto result = hgad::synth_generate(synth, synth.seed);
    const auto files = pipeline_files(config, out_dir);
    result.train.schema.save(files.schema);
    hgad::write_csv(files.train_csv, result.train);
    hgad::write_csv(files.test_csv, result.test);
    {
        std::ofstream truth((fs::path(out_dir) / "truth.json").string());
        if (!truth) throw hgad::IoError("cannot write truth.json in " + out_dir);
        truth << hgad::synth_truth_json(result, synth) << "\n";
    }
    std::cout << "wrote " << files.train_csv << " (" << result.train.rows << " rows), "
              << files.test_csv << " (" << result.test.rows << " rows)\n";
    std::cout << "labels: " << result.label_count << " anomalous of " << result.test.rows
              << " rows ("
              << 100.0 * static_cast<double>(result.label_count) /
                     static_cast<double>(result.test.rows)
              << "%), " << result.segments.size() << " segments\n";
    return 0;
}

int cmd_train(const CommonArgs& args) {
    const json config = load_json_file(args.config_path);
    const std::string out_dir = resolve_output_dir(args, config);
    ensure_dir(out_dir);
    const auto files = pipeline_files(config, out_dir);
    if (!fs::exists(files.schema)) {
        throw CLI::ValidationError("train", "schema file not found: " + files.schema);
    }
    const auto schema = hgad::VariableSchema::load(files.schema);
    const auto train_config = train_config_from(config, args);
    const double valid_fraction = config.value("validation_fraction", 0.1);

    const auto raw = hgad::load_csv(files.train_csv, schema, {});
    auto [train_part, valid_part] =
        hgad::split_validation(raw, valid_fraction, train_config.dims.window);
    const auto normalizer = hgad::fit_normalizer(train_part);
    train_part = hgad::apply_normalizer(train_part, normalizer);
    valid_part = hgad::apply_normalizer(valid_part, normalizer);

    auto result = hgad::train(train_part, valid_part, train_config);

    const auto source = hgad::calibration_source_from_string(
        config.contains("detector")
            ? config["detector"].value("calibration_source", "abs_error")
            : "abs_error");
    hgad::Checkpoint ckpt;
    ckpt.params = std::move(result.params);
    ckpt.normalizer = normalizer;
    ckpt.calibration = hgad::calibrate(ckpt.params, valid_part, source);
    ckpt.save(files.checkpoint);
    result.report.checkpoint_path = files.checkpoint;

    const std::string report_path = (fs::path(out_dir) / "train_report.json").string();
    std::ofstream report(report_path);
    if (!report) throw hgad::IoError("cannot write " + report_path);
    report << result.report.to_json() << "\n";

    std::cout << "trained " << result.report.epoch_train_loss.size() << " epochs ("
              << result.report.stop_reason << ": " << result.report.stop_detail << ")\n"
              << "final train loss " << result.report.epoch_train_loss.back()
              << ", best valid loss " << result.report.best_valid_loss << " @ epoch "
              << result.report.best_epoch << " [ablation " << result.report.ablation << "]\n"
              << "checkpoint: " << files.checkpoint << "\n";
    return 0;
}

void check_schema_columns(const std::string& csv_path, const hgad::VariableSchema& schema) {
    std::ifstream in(csv_path);
    if (!in) throw hgad::IoError("cannot open CSV file: " + csv_path);
    std::string header;
    if (!std::getline(in, header)) throw hgad::DataError("empty CSV file: " + csv_path);
    std::vector<std::string> found;
    std::string cur;
    for (char c : header) {
        if (c == ',') {
            found.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    found.push_back(cur);
    std::vector<std::string> missing;
    for (const auto& e : schema.entries) {
        if (std::find(found.begin(), found.end(), e.name) == found.end()) {
            missing.push_back(e.name);
        }
    }
    if (!missing.empty()) {
        std::ostringstream os;
        os << "schema mismatch for " << csv_path << "\n  expected:";
        for (const auto& e : schema.entries) os << " " << e.name;
        os << "\n  found:";
        for (const auto& f : found) os << " " << f;
        os << "\n  missing:";
        for (const auto& m : missing) os << " " << m;
        throw hgad::DataError(os.str());
    }
}

int cmd_detect(const std::string& checkpoint_path, const std::string& test_csv,
               const CommonArgs& args, bool export_scores, std::optional<std::size_t> graph_at) {
    const json config =
        args.config_path.empty() ? json::object() : load_json_file(args.config_path);
    const std::string out_dir = resolve_output_dir(args, config);
    ensure_dir(out_dir);

    const auto ckpt = hgad::Checkpoint::load(checkpoint_path);
    check_schema_columns(test_csv, ckpt.params.schema);
    hgad::CsvLoadOptions load_opts;
    load_opts.label_column = "label";
    auto frame = hgad::load_csv(test_csv, ckpt.params.schema, load_opts);
    frame = hgad::apply_normalizer(frame, ckpt.normalizer);

    auto report = hgad::detect(ckpt.params, ckpt.calibration, frame);
    report.seed = args.seed.value_or(0);

    const std::string report_path = (fs::path(out_dir) / "detection_report.json").string();
    {
        std::ofstream out(report_path);
        if (!out) throw hgad::IoError("cannot write " + report_path);
        out << report.to_json() << "\n";
    }
    if (export_scores) {
        hgad::write_score_csv((fs::path(out_dir) / "scores.csv").string(), report);
        hgad::write_sensor_score_csv((fs::path(out_dir) / "sensor_scores.csv").string(),
                                     report);
    }
    if (graph_at) {
        const auto windows = hgad::make_windows(frame, ckpt.params.dims.window);
        if (*graph_at >= windows.size()) {
            throw hgad::DataError("--graph-at " + std::to_string(*graph_at) +
                                  " is outside the scored range (0.." +
                                  std::to_string(windows.size() - 1) + ")");
        }
        const auto fwd = hgad::forward(ckpt.params, windows[*graph_at]);
        hgad::export_graph(fwd.bundle, ckpt.params.schema, out_dir,
                           "graph_t" + std::to_string(*graph_at) + "_");
    }

    if (report.has_metrics) {
        std::cout << "threshold " << report.threshold << "\n"
                  << "precision " << report.best.precision << " recall " << report.best.recall
                  << " f1 " << report.best.f1 << "\n";
    } else if (report.degenerate_labels) {
        std::cout << "labels are all-0 or all-1: metrics undefined, F1 reported as 0\n";
    } else {
        std::cout << "no label column: scores written, metrics omitted\n";
    }
    std::cout << "report: " << report_path << "\n";
    return 0;
}

int cmd_localize(const std::string& report_path, std::size_t from, std::size_t to,
                 const std::string& out_csv) {
    std::ifstream in(report_path);
    if (!in) throw hgad::IoError("cannot open report: " + report_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto report = hgad::DetectionReport::from_json(buf.str());
    if (report.sensor_scores.empty()) {
        throw hgad::DataError("report has no per-sensor scores");
    }
    if (from < report.first_timestamp || to <= from) {
        throw hgad::DataError("range [" + std::to_string(from) + ", " + std::to_string(to) +
                              ") is invalid; scored region starts at " +
                              std::to_string(report.first_timestamp));
    }
    hgad::ScoreResult scores;
    scores.n_sensors = report.sensor_names.size();
    scores.first_timestamp = report.first_timestamp;
    scores.scores = report.scores;
    scores.sensor_scores = report.sensor_scores;
    hgad::VariableSchema schema;
    for (const auto& n : report.sensor_names) {
        // Kinds are irrelevant for exceedance counting.
        schema.entries.push_back({n, hgad::VariableKind::Continuous});
    }
    const std::size_t begin = from - report.first_timestamp;
    const std::size_t end = to - report.first_timestamp;
    if (end > scores.scores.size()) {
        throw hgad::DataError("range end " + std::to_string(to) +
                              " is past the scored region");
    }
    const auto ranking = hgad::localize(scores, schema, report.threshold, begin, end);
    std::cout << "sensor,exceedances (threshold " << report.threshold << ", timestamps ["
              << from << ", " << to << "))\n";
    for (const auto& r : ranking) std::cout << r.name << "," << r.count << "\n";
    if (!out_csv.empty()) {
        std::ofstream out(out_csv);
        if (!out) throw hgad::IoError("cannot write " + out_csv);
        out << "sensor,count\n";
        for (const auto& r : ranking) out << r.name << "," << r.count << "\n";
    }
    return 0;
}

int cmd_ablate(const CommonArgs& args, std::size_t jobs) {
    const json config = load_json_file(args.config_path);
    const std::string out_dir = resolve_output_dir(args, config);
    ensure_dir(out_dir);
    const auto files = pipeline_files(config, out_dir);
    const auto schema = hgad::VariableSchema::load(files.schema);
    const auto base_config = train_config_from(config, args);
    const double valid_fraction = config.value("validation_fraction", 0.1);

    const auto raw = hgad::load_csv(files.train_csv, schema, {});
    auto [train_part, valid_part] =
        hgad::split_validation(raw, valid_fraction, base_config.dims.window);
    const auto normalizer = hgad::fit_normalizer(train_part);
    train_part = hgad::apply_normalizer(train_part, normalizer);
    valid_part = hgad::apply_normalizer(valid_part, normalizer);
    hgad::CsvLoadOptions load_opts;
    load_opts.label_column = "label";
    auto test_frame = hgad::load_csv(files.test_csv, schema, load_opts);
    test_frame = hgad::apply_normalizer(test_frame, normalizer);

    const std::vector<std::string> variants = {"none", "NE", "NF", "DFS", "CFS", "HFS"};
    struct Row {
        hgad::Metrics best;
        double threshold = 0.0;
    };
    std::vector<Row> rows(variants.size());

    auto run_variant = [&](std::size_t idx) {
        hgad::TrainConfig cfg = base_config;
        cfg.ablation = hgad::AblationFlags::parse(variants[idx]);
        auto trained = hgad::train(train_part, valid_part, cfg);
        const auto calib = hgad::calibrate(trained.params, valid_part);
        const auto report = hgad::detect(trained.params, calib, test_frame);
        rows[idx] = {report.best, report.threshold};
    };

    std::size_t next = 0;
    const std::size_t workers = std::max<std::size_t>(1, jobs);
    while (next < variants.size()) {
        std::vector<std::future<void>> batch;
        for (std::size_t w = 0; w < workers && next < variants.size(); ++w, ++next) {
            batch.push_back(std::async(std::launch::async, run_variant, next));
        }
        for (auto& f : batch) f.get();
    }

    const std::string csv_path = (fs::path(out_dir) / "ablation.csv").string();
    std::ofstream out(csv_path);
    if (!out) throw hgad::IoError("cannot write " + csv_path);
    out << "variant,precision,recall,f1,threshold\n";
    std::cout << "variant,precision,recall,f1,threshold\n";
    for (std::size_t i = 0; i < variants.size(); ++i) {
        std::ostringstream line;
        line << variants[i] << "," << rows[i].best.precision << "," << rows[i].best.recall
             << "," << rows[i].best.f1 << "," << rows[i].threshold;
        out << line.str() << "\n";
        std::cout << line.str() << "\n";
    }
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-attention anomaly detection for mixed sensor series"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_path, test_csv, report_path, localize_csv;
    bool export_scores = false;
    std::optional<std::size_t> graph_at;
    std::size_t loc_from = 0, loc_to = 0;
    std::size_t jobs = 2;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config,-c", args.config_path, "run config JSON");
        if (needs_config) opt->required();
        sub->add_option("--out,-o", args.output_dir,
                        "output directory (default: config, then $HGAD_OUTPUT_DIR, then .)");
        sub->add_option("--seed", args.seed, "seed override");
        sub->add_option("--window", args.window, "sliding window length override");
        sub->add_option("--heads", args.heads, "attention head count override");
        sub->add_option("--mask-p", args.mask_p, "edge mask probability override");
    };

    auto* synth = app.add_subcommand("synth", "generate labeled synthetic train/test CSVs");
    add_common(synth, true);

    auto* train = app.add_subcommand("train", "train a model on normal data");
    add_common(train, true);
    train->add_option("--ablate", args.ablate,
                      "comma-separated component toggles: NE,NF,DFS,CFS,HFS");

    auto* detect = app.add_subcommand("detect", "score a test CSV against a checkpoint");
    add_common(detect, false);
    detect->add_option("--checkpoint,-k", checkpoint_path, "trained checkpoint")->required();
    detect->add_option("--test-csv,-t", test_csv, "test CSV")->required();
    detect->add_flag("--export-scores", export_scores, "also write score CSVs");
    detect->add_option("--graph-at", graph_at,
                       "export similarity/adjacency CSVs for this window index");

    auto* localize = app.add_subcommand("localize", "rank sensors by score exceedances");
    localize->add_option("--report,-r", report_path, "detection report JSON")->required();
    localize->add_option("--from", loc_from, "first timestamp (inclusive)")->required();
    localize->add_option("--to", loc_to, "last timestamp (exclusive)")->required();
    localize->add_option("--csv", localize_csv, "also write the ranking as CSV");

    auto* ablate = app.add_subcommand("ablate", "train/evaluate the component-toggle matrix");
    add_common(ablate, true);
    ablate->add_option("--jobs,-j", jobs, "parallel training runs (default 2)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*synth) return cmd_synth(args);
        if (*train) return cmd_train(args);
        if (*detect) return cmd_detect(checkpoint_path, test_csv, args, export_scores, graph_at);
        if (*localize) return cmd_localize(report_path, loc_from, loc_to, localize_csv);
        if (*ablate) return cmd_ablate(args, jobs);
    } catch (const hgad::DivergenceError& e) {
        std::cerr << "error (divergence): " << e.what() << "\n";
        return kExitDivergence;
    } catch (const hgad::IoError& e) {
        std::cerr << "error (io): " << e.what() << "\n";
        return kExitIo;
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error (usage): " << e.what() << "\n";
        return kExitUsage;
    } catch (const hgad::DataError& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return kExitData;
    } catch (const hgad::ConfigError& e) {
        std::cerr << "error (config): " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
