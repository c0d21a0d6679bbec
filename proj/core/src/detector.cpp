#include "hgad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

std::string to_string(CalibrationSource s) {
    return s == CalibrationSource::AbsError ? "abs_error" : "prediction";
}

CalibrationSource calibration_source_from_string(const std::string& s) {
    if (s == "abs_error" || s == "error") return CalibrationSource::AbsError;
    if (s == "prediction" || s == "predicted") return CalibrationSource::Prediction;
    throw ConfigError("unknown calibration source '" + s +
                      "' (expected abs_error|prediction)");
}

double quantile(std::vector<double> sample, double q) {
    if (sample.empty()) throw DataError("quantile of empty sample");
    std::sort(sample.begin(), sample.end());
    const double pos = q * static_cast<double>(sample.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sample[lo] * (1.0 - frac) + sample[hi] * frac;
}

Calibration calibrate(const ModelParams& params, const SeriesFrame& valid_frame,
                      CalibrationSource source) {
    const auto windows = make_windows(valid_frame, params.dims.window);
    if (windows.size() < 10) {
        throw DataError("calibration needs at least 10 validation windows, got " +
                        std::to_string(windows.size()));
    }
    const std::size_t L = params.schema.size();
    std::vector<std::vector<double>> series(L);
    for (auto& s : series) s.reserve(windows.size());
    for (const auto& w : windows) {
        auto pred = forward(params, w).prediction;
        for (std::size_t i = 0; i < L; ++i) {
            const double v = source == CalibrationSource::AbsError
                                 ? std::fabs(w.target[i] - pred->values[i])
                                 : pred->values[i];
            series[i].push_back(v);
        }
    }
    Calibration calib;
    calib.source = source;
    calib.n_windows = windows.size();
    calib.iqr.resize(L);
    calib.median.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
        calib.median[i] = quantile(series[i], 0.5);
        calib.iqr[i] = quantile(series[i], 0.75) - quantile(series[i], 0.25);
    }
    return calib;
}

ScoreResult score(const ModelParams& params, const Calibration& calib,
                  const SeriesFrame& frame) {
    const std::size_t L = params.schema.size();
    if (calib.iqr.size() != L) {
        throw DataError("calibration covers " + std::to_string(calib.iqr.size()) +
                        " sensors, schema has " + std::to_string(L));
    }
    const auto windows = make_windows(frame, params.dims.window);
    ScoreResult result;
    result.n_sensors = L;
    result.first_timestamp = params.dims.window;
    result.sensor_scores.resize(windows.size() * L);
    result.scores.resize(windows.size());
    result.argmax_sensor.resize(windows.size());
    for (std::size_t t = 0; t < windows.size(); ++t) {
        auto pred = forward(params, windows[t]).prediction;
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_i = 0;
        for (std::size_t i = 0; i < L; ++i) {
            const double err = std::fabs(windows[t].target[i] - pred->values[i]);
            const double s = (err - calib.iqr[i]) / (calib.median[i] + 1.0);
            result.sensor_scores[t * L + i] = s;
            if (s > best) {
                best = s;
                best_i = i;
            }
        }
        result.scores[t] = best;
        result.argmax_sensor[t] = best_i;
    }
    return result;
}

Metrics metrics(const std::vector<int>& flags, const std::vector<int>& labels) {
    if (flags.size() != labels.size()) {
        throw DataError("metrics: flags length " + std::to_string(flags.size()) +
                        " vs labels length " + std::to_string(labels.size()));
    }
    Metrics m;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] != 0 && flags[i] != 1) throw DataError("metrics: flags must be 0/1");
        if (labels[i] != 0 && labels[i] != 1) throw DataError("metrics: labels must be 0/1");
        if (flags[i] && labels[i]) ++m.tp;
        else if (flags[i] && !labels[i]) ++m.fp;
        else if (!flags[i] && labels[i]) ++m.fn;
        else ++m.tn;
    }
    m.precision = m.tp + m.fp == 0 ? 0.0
                                   : static_cast<double>(m.tp) /
                                         static_cast<double>(m.tp + m.fp);
    m.recall = m.tp + m.fn == 0 ? 0.0
                                : static_cast<double>(m.tp) /
                                      static_cast<double>(m.tp + m.fn);
    m.f1 = m.precision + m.recall == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

SweepResult sweep_threshold(const std::vector<double>& scores,
                            const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("sweep_threshold: scores and labels must align and be non-empty");
    }
    SweepResult result;
    const bool any_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool any_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!any_pos || !any_neg) {
        result.degenerate_labels = true;
        result.threshold = *std::max_element(scores.begin(), scores.end());
        return result;  // metrics undefined; F1 stays 0
    }

    std::vector<double> uniq = scores;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double> candidates;
    candidates.reserve(uniq.size() * 2 + 1);
    candidates.push_back(uniq.front() - 1.0);  // flag everything
    for (std::size_t i = 0; i < uniq.size(); ++i) {
        candidates.push_back(uniq[i]);
        if (i + 1 < uniq.size()) candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    }

    bool first = true;
    std::vector<int> flags(scores.size());
    for (double cand : candidates) {
        for (std::size_t i = 0; i < scores.size(); ++i) flags[i] = scores[i] > cand ? 1 : 0;
        const Metrics m = metrics(flags, labels);
        if (first || m.f1 > result.best.f1) {
            result.best = m;
            result.threshold = cand;
            first = false;
        }
    }
    return result;
}

std::vector<SensorExceedance> localize(const ScoreResult& scores,
                                       const VariableSchema& schema, double threshold,
                                       std::size_t begin, std::size_t end) {
    if (begin >= end || end > scores.scores.size()) {
        throw DataError("localize: empty or out-of-range interval [" +
                        std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                        std::to_string(scores.scores.size()) + " scored timestamps");
    }
    const std::size_t L = scores.n_sensors;
    std::vector<SensorExceedance> out(L);
    for (std::size_t i = 0; i < L; ++i) {
        out[i].sensor = i;
        out[i].name = schema[i].name;
        for (std::size_t t = begin; t < end; ++t) {
            if (scores.sensor_score(t, i) > threshold) ++out[i].count;
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SensorExceedance& a, const SensorExceedance& b) {
                         return a.count > b.count;  // ties keep schema order
                     });
    return out;
}

DetectionReport detect(const ModelParams& params, const Calibration& calib,
                       const SeriesFrame& test_frame) {
    DetectionReport report;
    const auto scored = score(params, calib, test_frame);
    report.first_timestamp = scored.first_timestamp;
    report.scores = scored.scores;
    report.sensor_scores = scored.sensor_scores;
    for (const auto& e : params.schema.entries) report.sensor_names.push_back(e.name);

    if (test_frame.labels) {
        report.labels.assign(test_frame.labels->begin() + scored.first_timestamp,
                             test_frame.labels->end());
        const auto sweep = sweep_threshold(report.scores, report.labels);
        report.threshold = sweep.threshold;
        report.best = sweep.best;
        report.degenerate_labels = sweep.degenerate_labels;
        report.has_metrics = !sweep.degenerate_labels;
    } else {
        // Unlabeled: report scores only, with a high quantile as a reference
        // threshold for localization.
        report.threshold = quantile(report.scores, 0.99);
    }
    report.exceedance =
        localize(scored, params.schema, report.threshold, 0, report.scores.size());
    return report;
}

std::string DetectionReport::to_json() const {
    nlohmann::json exc = nlohmann::json::array();
    for (const auto& e : exceedance) {
        exc.push_back({{"sensor", e.sensor}, {"name", e.name}, {"count", e.count}});
    }
    nlohmann::json j{{"first_timestamp", first_timestamp},
                     {"threshold", threshold},
                     {"has_metrics", has_metrics},
                     {"degenerate_labels", degenerate_labels},
                     {"precision", best.precision},
                     {"recall", best.recall},
                     {"f1", best.f1},
                     {"confusion", {{"tp", best.tp}, {"fp", best.fp}, {"fn", best.fn}, {"tn", best.tn}}},
                     {"sensor_names", sensor_names},
                     {"scores", scores},
                     {"sensor_scores", sensor_scores},
                     {"labels", labels},
                     {"exceedance", exc},
                     {"seed", seed}};
    return j.dump();
}

DetectionReport DetectionReport::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("detection report is not valid JSON: ") + e.what());
    }
    DetectionReport r;
    r.first_timestamp = j.at("first_timestamp").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.has_metrics = j.at("has_metrics").get<bool>();
    r.degenerate_labels = j.value("degenerate_labels", false);
    r.best.precision = j.at("precision").get<double>();
    r.best.recall = j.at("recall").get<double>();
    r.best.f1 = j.at("f1").get<double>();
    r.best.tp = j.at("confusion").at("tp").get<std::size_t>();
    r.best.fp = j.at("confusion").at("fp").get<std::size_t>();
    r.best.fn = j.at("confusion").at("fn").get<std::size_t>();
    r.best.tn = j.at("confusion").at("tn").get<std::size_t>();
    r.sensor_names = j.at("sensor_names").get<std::vector<std::string>>();
    r.scores = j.at("scores").get<std::vector<double>>();
    r.sensor_scores = j.at("sensor_scores").get<std::vector<double>>();
    r.labels = j.value("labels", std::vector<int>{});
    r.seed = j.value("seed", 0ULL);
    for (const auto& e : j.at("exceedance")) {
        r.exceedance.push_back({e.at("sensor").get<std::size_t>(),
                                e.at("name").get<std::string>(),
                                e.at("count").get<std::size_t>()});
    }
    return r;
}

namespace {
std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

void write_score_csv(const std::string& path, const DetectionReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write score CSV: " + path);
    const bool labeled = !report.labels.empty();
    out << "timestamp,score,flag";
    if (labeled) out << ",label";
    out << "\n";
    for (std::size_t t = 0; t < report.scores.size(); ++t) {
        out << (report.first_timestamp + t) << "," << fmt(report.scores[t]) << ","
            << (report.scores[t] > report.threshold ? 1 : 0);
        if (labeled) out << "," << report.labels[t];
        out << "\n";
    }
}

void write_sensor_score_csv(const std::string& path, const DetectionReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write sensor score CSV: " + path);
    out << "timestamp";
    for (const auto& n : report.sensor_names) out << "," << n;
    out << "\n";
    const std::size_t L = report.sensor_names.size();
    for (std::size_t t = 0; t < report.scores.size(); ++t) {
        out << (report.first_timestamp + t);
        for (std::size_t i = 0; i < L; ++i) {
            out << "," << fmt(report.sensor_scores[t * L + i]);
        }
        out << "\n";
    }
}

}  // namespace hgad
