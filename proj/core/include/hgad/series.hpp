#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hgad/schema.hpp"

namespace hgad {

/// A typed multivariate series: T rows by L variables, row-major, with an
/// optional {0,1} label per row. Immutable after construction by convention;
/// safe to share read-only across scoring workers.
struct SeriesFrame {
    VariableSchema schema;
    std::size_t rows = 0;
    std::vector<double> values;  // rows x L
    std::optional<std::vector<int>> labels;
    std::optional<std::vector<double>> timestamps;

    double at(std::size_t t, std::size_t var) const { return values[t * schema.size() + var]; }
    double& at(std::size_t t, std::size_t var) { return values[t * schema.size() + var]; }
    std::size_t n_vars() const { return schema.size(); }
};

/// Per-variable min/max fitted on the training frame only. Test values may
/// map outside [0,1]; constant columns map to 0.
struct Normalizer {
    std::vector<double> min_v;
    std::vector<double> max_v;

    bool zero_range(std::size_t var) const { return max_v[var] == min_v[var]; }
    double apply_one(double x, std::size_t var) const;
    double invert_one(double y, std::size_t var) const;
};

/// One training/scoring sample: an L x omega input block (row = variable,
/// column = time, oldest first) and the length-L target at the next step.
struct WindowSample {
    std::vector<double> input;   // L x omega, row-major
    std::vector<double> target;  // length L
    std::size_t target_index = 0;
    std::size_t n_vars = 0;
    std::size_t window = 0;
};

struct CsvLoadOptions {
    std::optional<std::string> label_column;  // stripped into labels when present
    bool forward_fill_missing = false;        // default: reject empty cells
};

/// Read a CSV whose header covers every schema name. Discrete variables must
/// already be integer-coded (see CategoryCodec). Extra columns are ignored.
SeriesFrame load_csv(const std::string& path, const VariableSchema& schema,
                     const CsvLoadOptions& options = {});

/// Write a frame back to CSV (variables in schema order, plus a trailing
/// `label` column when labels are present). Deterministic formatting.
void write_csv(const std::string& path, const SeriesFrame& frame);

Normalizer fit_normalizer(const SeriesFrame& train);
SeriesFrame apply_normalizer(const SeriesFrame& frame, const Normalizer& norm);

/// All T - omega sliding windows of the frame. Sample k covers rows
/// [k, k+omega) with target row k+omega.
std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t omega);

/// Chronological split: validation is the trailing fraction. Both partitions
/// must keep at least omega + 2 rows.
std::pair<SeriesFrame, SeriesFrame> split_validation(const SeriesFrame& frame,
                                                     double fraction, std::size_t omega);

/// Maps string categories to integer codes in first-seen order, so discrete
/// columns exported as text (e.g. "open"/"closed") can be fed to the loader.
class CategoryCodec {
public:
    int encode(const std::string& category);
    std::optional<int> lookup(const std::string& category) const;
    const std::vector<std::string>& categories() const { return categories_; }
    void save(const std::string& path) const;
    static CategoryCodec load(const std::string& path);

private:
    std::map<std::string, int> codes_;
    std::vector<std::string> categories_;
};

}  // namespace hgad
