#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hgad/model.hpp"
#include "hgad/series.hpp"

namespace hgad {

/// Which per-sensor series the IQR/median statistics describe. The default
/// uses the absolute prediction error on normal validation data; the
/// alternative reading uses the raw predicted values.
enum class CalibrationSource { AbsError, Prediction };

std::string to_string(CalibrationSource s);
CalibrationSource calibration_source_from_string(const std::string& s);

struct Calibration {
    std::vector<double> iqr;     // per sensor, Q3 - Q1
    std::vector<double> median;  // per sensor
    std::size_t n_windows = 0;
    CalibrationSource source = CalibrationSource::AbsError;
};

/// Linear-interpolation quantile of a sample (q in [0,1]).
double quantile(std::vector<double> sorted_or_not, double q);

/// Run the model over all validation windows and fit per-sensor IQR/median
/// statistics. Requires at least 10 windows.
Calibration calibrate(const ModelParams& params, const SeriesFrame& valid_frame,
                      CalibrationSource source = CalibrationSource::AbsError);

struct ScoreResult {
    std::vector<double> sensor_scores;  // (rows - window) x L, row-major
    std::vector<double> scores;         // max over sensors per timestamp
    std::vector<std::size_t> argmax_sensor;
    std::size_t first_timestamp = 0;  // frame row of scores[0] (= window length)
    std::size_t n_sensors = 0;

    double sensor_score(std::size_t t, std::size_t sensor) const {
        return sensor_scores[t * n_sensors + sensor];
    }
};

/// Condition scores over every window of a frame:
/// score_i = (|x_i - pred_i| - iqr_i) / (median_i + 1), overall = max_i.
ScoreResult score(const ModelParams& params, const Calibration& calib,
                  const SeriesFrame& frame);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Point-wise confusion metrics, zero-division guarded to 0.
Metrics metrics(const std::vector<int>& flags, const std::vector<int>& labels);

struct SweepResult {
    double threshold = 0.0;
    Metrics best;
    bool degenerate_labels = false;  // all-0 or all-1 labels: F1 reported as 0
};

/// Exhaustive best-F1 threshold sweep (predicted anomaly = score > threshold).
/// Candidates are every unique score, adjacent midpoints, and a sentinel below
/// the minimum, so the returned optimum is exact. No point-adjust.
SweepResult sweep_threshold(const std::vector<double>& scores,
                            const std::vector<int>& labels);

struct SensorExceedance {
    std::size_t sensor = 0;
    std::string name;
    std::size_t count = 0;
};

/// Per-sensor count of timestamps in [begin, end) (score-index space) whose
/// condition score exceeds the threshold, ranked descending (ties by schema
/// order).
std::vector<SensorExceedance> localize(const ScoreResult& scores,
                                       const VariableSchema& schema, double threshold,
                                       std::size_t begin, std::size_t end);

struct DetectionReport {
    std::size_t first_timestamp = 0;
    double threshold = 0.0;
    bool has_metrics = false;
    Metrics best;
    bool degenerate_labels = false;
    std::vector<double> scores;
    std::vector<double> sensor_scores;  // flattened (rows x L)
    std::vector<std::string> sensor_names;
    std::vector<int> labels;  // aligned to scores; empty when unlabeled
    std::vector<SensorExceedance> exceedance;  // over the full scored range
    std::uint64_t seed = 0;

    std::string to_json() const;
    static DetectionReport from_json(const std::string& text);
};

/// Score a (normalized) test frame, pick the best-F1 threshold when labels
/// are present, and assemble the report. Labels for the first `window` rows
/// are dropped to stay aligned with the scored timestamps.
DetectionReport detect(const ModelParams& params, const Calibration& calib,
                       const SeriesFrame& test_frame);

/// Write scores (+labels/flags) and the per-sensor score matrix as CSV.
void write_score_csv(const std::string& path, const DetectionReport& report);
void write_sensor_score_csv(const std::string& path, const DetectionReport& report);

}  // namespace hgad
