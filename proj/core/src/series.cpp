#include "hgad/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

/// Deterministic shortest-round-trip double formatting for CSV output.
std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    double parsed = std::strtod(buf, nullptr);
    if (parsed == v) {
        // Try shorter representations that still round-trip.
        for (int prec = 1; prec <= 16; ++prec) {
            char shorter[40];
            std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
            if (std::strtod(shorter, nullptr) == v) return shorter;
        }
    }
    return buf;
}

}  // namespace

double Normalizer::apply_one(double x, std::size_t var) const {
    if (zero_range(var)) return 0.0;
    return (x - min_v[var]) / (max_v[var] - min_v[var]);
}

double Normalizer::invert_one(double y, std::size_t var) const {
    if (zero_range(var)) return min_v[var];
    return y * (max_v[var] - min_v[var]) + min_v[var];
}

SeriesFrame load_csv(const std::string& path, const VariableSchema& schema,
                     const CsvLoadOptions& options) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw IoError("cannot open CSV file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) throw DataError("empty CSV file: " + path);
    const auto header = split_csv_line(header_line);

    const std::size_t L = schema.size();
    std::vector<std::size_t> col_of(L);
    for (std::size_t v = 0; v < L; ++v) {
        auto it = std::find(header.begin(), header.end(), schema[v].name);
        if (it == header.end()) {
            throw DataError("CSV " + path + " is missing column '" + schema[v].name + "'");
        }
        col_of[v] = static_cast<std::size_t>(it - header.begin());
    }
    std::optional<std::size_t> label_col;
    if (options.label_column) {
        auto it = std::find(header.begin(), header.end(), *options.label_column);
        if (it != header.end()) label_col = static_cast<std::size_t>(it - header.begin());
    }

    SeriesFrame frame;
    frame.schema = schema;
    std::vector<int> labels;
    std::vector<double> last_row(L, 0.0);
    bool have_last = false;

    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() < header.size()) {
            throw DataError("CSV " + path + " row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
        }
        for (std::size_t v = 0; v < L; ++v) {
            const std::string cell = trim(fields[col_of[v]]);
            if (cell.empty()) {
                if (options.forward_fill_missing && have_last) {
                    frame.values.push_back(last_row[v]);
                    continue;
                }
                throw DataError("CSV " + path + " row " + std::to_string(row) + " column '" +
                                schema[v].name + "' is empty");
            }
            char* end = nullptr;
            const double parsed = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0' || !std::isfinite(parsed)) {
                throw DataError("CSV " + path + " row " + std::to_string(row) + " column '" +
                                schema[v].name + "': cannot parse '" + cell + "'");
            }
            frame.values.push_back(parsed);
        }
        for (std::size_t v = 0; v < L; ++v) last_row[v] = frame.values[frame.rows * L + v];
        have_last = true;
        if (label_col) {
            const std::string cell = trim(fields[*label_col]);
            if (cell != "0" && cell != "1") {
                throw DataError("CSV " + path + " row " + std::to_string(row) +
                                ": label must be 0 or 1, got '" + cell + "'");
            }
            labels.push_back(cell == "1" ? 1 : 0);
        }
        ++frame.rows;
    }
    if (frame.rows == 0) throw DataError("CSV file has a header but no data rows: " + path);
    if (label_col) frame.labels = std::move(labels);
    return frame;
}

void write_csv(const std::string& path, const SeriesFrame& frame) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write CSV file: " + path);
    const std::size_t L = frame.n_vars();
    for (std::size_t v = 0; v < L; ++v) {
        if (v) out << ",";
        out << frame.schema[v].name;
    }
    if (frame.labels) out << ",label";
    out << "\n";
    for (std::size_t t = 0; t < frame.rows; ++t) {
        for (std::size_t v = 0; v < L; ++v) {
            if (v) out << ",";
            out << format_double(frame.at(t, v));
        }
        if (frame.labels) out << "," << (*frame.labels)[t];
        out << "\n";
    }
    if (!out) throw IoError("write failed for CSV file: " + path);
}

Normalizer fit_normalizer(const SeriesFrame& train) {
    if (train.rows < 2) {
        throw DataError("normalizer needs at least 2 rows, got " + std::to_string(train.rows));
    }
    const std::size_t L = train.n_vars();
    Normalizer norm;
    norm.min_v.assign(L, 0.0);
    norm.max_v.assign(L, 0.0);
    for (std::size_t v = 0; v < L; ++v) {
        double lo = train.at(0, v), hi = train.at(0, v);
        for (std::size_t t = 1; t < train.rows; ++t) {
            lo = std::min(lo, train.at(t, v));
            hi = std::max(hi, train.at(t, v));
        }
        norm.min_v[v] = lo;
        norm.max_v[v] = hi;
    }
    return norm;
}

SeriesFrame apply_normalizer(const SeriesFrame& frame, const Normalizer& norm) {
    if (norm.min_v.size() != frame.n_vars()) {
        throw DataError("normalizer was fitted on " + std::to_string(norm.min_v.size()) +
                        " variables, frame has " + std::to_string(frame.n_vars()));
    }
    SeriesFrame out = frame;
    const std::size_t L = frame.n_vars();
    for (std::size_t t = 0; t < frame.rows; ++t) {
        for (std::size_t v = 0; v < L; ++v) {
            out.at(t, v) = norm.apply_one(frame.at(t, v), v);
        }
    }
    return out;
}

std::vector<WindowSample> make_windows(const SeriesFrame& frame, std::size_t omega) {
    if (omega == 0) throw ConfigError("window length must be positive");
    if (frame.rows <= omega) {
        throw DataError("insufficient data: need more than " + std::to_string(omega) +
                        " rows, got " + std::to_string(frame.rows));
    }
    const std::size_t L = frame.n_vars();
    const std::size_t count = frame.rows - omega;
    std::vector<WindowSample> samples(count);
    for (std::size_t k = 0; k < count; ++k) {
        WindowSample& s = samples[k];
        s.n_vars = L;
        s.window = omega;
        s.target_index = k + omega;
        s.input.resize(L * omega);
        s.target.resize(L);
        for (std::size_t v = 0; v < L; ++v) {
            for (std::size_t c = 0; c < omega; ++c) {
                s.input[v * omega + c] = frame.at(k + c, v);
            }
            s.target[v] = frame.at(k + omega, v);
        }
    }
    return samples;
}

std::pair<SeriesFrame, SeriesFrame> split_validation(const SeriesFrame& frame,
                                                     double fraction, std::size_t omega) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw ConfigError("validation fraction must lie in (0,1)");
    }
    const std::size_t valid_rows = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(frame.rows)));
    const std::size_t train_rows = frame.rows - valid_rows;
    const std::size_t min_rows = omega + 2;
    if (valid_rows < min_rows || train_rows < min_rows) {
        throw DataError("validation split too small: train=" + std::to_string(train_rows) +
                        " valid=" + std::to_string(valid_rows) + " rows, need at least " +
                        std::to_string(min_rows) + " each");
    }
    auto slice = [&](std::size_t begin, std::size_t count) {
        SeriesFrame part;
        part.schema = frame.schema;
        part.rows = count;
        const std::size_t L = frame.n_vars();
        part.values.assign(frame.values.begin() + begin * L,
                           frame.values.begin() + (begin + count) * L);
        if (frame.labels) {
            part.labels = std::vector<int>(frame.labels->begin() + begin,
                                           frame.labels->begin() + begin + count);
        }
        if (frame.timestamps) {
            part.timestamps = std::vector<double>(frame.timestamps->begin() + begin,
                                                  frame.timestamps->begin() + begin + count);
        }
        return part;
    };
    return {slice(0, train_rows), slice(train_rows, valid_rows)};
}

int CategoryCodec::encode(const std::string& category) {
    auto it = codes_.find(category);
    if (it != codes_.end()) return it->second;
    const int code = static_cast<int>(categories_.size());
    codes_.emplace(category, code);
    categories_.push_back(category);
    return code;
}

std::optional<int> CategoryCodec::lookup(const std::string& category) const {
    auto it = codes_.find(category);
    if (it == codes_.end()) return std::nullopt;
    return it->second;
}

void CategoryCodec::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write category mapping: " + path);
    out << nlohmann::json{{"categories", categories_}}.dump(2) << "\n";
}

CategoryCodec CategoryCodec::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open category mapping: " + path);
    nlohmann::json j;
    in >> j;
    CategoryCodec codec;
    for (const auto& c : j.at("categories")) codec.encode(c.get<std::string>());
    return codec;
}

}  // namespace hgad
