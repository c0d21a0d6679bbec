#include "hgad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "hgad/error.hpp"

namespace hgad {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
// Latent driver periods: two sensor groups plus the detuned replacement used
// by correlation-break segments.
constexpr double kPeriods[2] = {97.0, 59.0};
constexpr double kBreakPeriod = 83.0;
constexpr std::size_t kActuatorLag = 2;
constexpr std::size_t kAutoSegmentMargin = 40;

struct ContinuousSpec {
    std::size_t driver;  // 0 or 1
    double gain;
    double offset;
};

}  // namespace

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::Spike: return "spike";
        case AnomalyKind::StuckAt: return "stuck";
        case AnomalyKind::ActuatorFlip: return "flip";
        case AnomalyKind::CorrelationBreak: return "break";
    }
    return "spike";
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "spike") return AnomalyKind::Spike;
    if (s == "stuck" || s == "stuck_at" || s == "stuck-at") return AnomalyKind::StuckAt;
    if (s == "flip" || s == "actuator_flip" || s == "actuator-flip")
        return AnomalyKind::ActuatorFlip;
    if (s == "break" || s == "correlation_break" || s == "correlation-break")
        return AnomalyKind::CorrelationBreak;
    throw ConfigError("unknown anomaly kind '" + s + "'");
}

void SynthConfig::validate() const {
    if (n_continuous == 0 || n_discrete == 0) {
        throw ConfigError("synthetic config needs at least one continuous and one discrete "
                          "variable");
    }
    if (t_train < 10 || t_test < 10) {
        throw ConfigError("synthetic frames need at least 10 rows");
    }
    if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
    if (segments.empty() && !(anomaly_rate > 0.0 && anomaly_rate < 0.5)) {
        throw ConfigError("anomaly_rate must lie in (0, 0.5)");
    }
    const std::size_t L = n_continuous + n_discrete;
    std::vector<std::pair<std::size_t, std::size_t>> spans;
    for (const auto& seg : segments) {
        if (seg.length == 0) throw ConfigError("anomaly segment has zero length");
        if (seg.start + seg.length > t_test) {
            throw ConfigError("anomaly segment [" + std::to_string(seg.start) + ", " +
                              std::to_string(seg.start + seg.length) +
                              ") exceeds test length " + std::to_string(t_test));
        }
        if (seg.variable >= L) {
            throw ConfigError("anomaly segment variable index " +
                              std::to_string(seg.variable) + " out of range");
        }
        const bool discrete = seg.variable >= n_continuous;
        if (seg.kind == AnomalyKind::ActuatorFlip && !discrete) {
            throw ConfigError("actuator-flip segments require a discrete variable");
        }
        if ((seg.kind == AnomalyKind::Spike || seg.kind == AnomalyKind::CorrelationBreak) &&
            discrete) {
            throw ConfigError(to_string(seg.kind) + " segments require a continuous variable");
        }
        spans.emplace_back(seg.start, seg.start + seg.length);
    }
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
        if (spans[i].first < spans[i - 1].second) {
            throw ConfigError("anomaly segments overlap");
        }
    }
}

SynthConfig SynthConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open synthetic config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("synthetic config " + path + " is not valid JSON: " + e.what());
    }
    SynthConfig c;
    c.n_continuous = j.value("n_continuous", c.n_continuous);
    c.n_discrete = j.value("n_discrete", c.n_discrete);
    c.t_train = j.value("t_train", c.t_train);
    c.t_test = j.value("t_test", c.t_test);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.seed = j.value("seed", c.seed);
    c.anomaly_rate = j.value("anomaly_rate", c.anomaly_rate);
    if (j.contains("kinds")) {
        c.kinds.clear();
        for (const auto& k : j["kinds"]) {
            c.kinds.push_back(anomaly_kind_from_string(k.get<std::string>()));
        }
        if (c.kinds.empty()) throw ConfigError("kinds list must not be empty");
    }
    if (j.contains("segments")) {
        for (const auto& s : j["segments"]) {
            AnomalySegment seg;
            seg.kind = anomaly_kind_from_string(s.at("kind").get<std::string>());
            if (s.at("variable").is_string()) {
                const std::string name = s["variable"].get<std::string>();
                // Names follow the generator convention s<i> / a<k>.
                if (name.size() >= 2 && name[0] == 's') {
                    seg.variable = std::stoul(name.substr(1));
                } else if (name.size() >= 2 && name[0] == 'a') {
                    seg.variable = c.n_continuous + std::stoul(name.substr(1));
                } else {
                    throw ConfigError("unknown segment variable name '" + name + "'");
                }
            } else {
                seg.variable = s["variable"].get<std::size_t>();
            }
            seg.start = s.at("start").get<std::size_t>();
            seg.length = s.at("length").get<std::size_t>();
            seg.magnitude = s.value("magnitude", seg.magnitude);
            c.segments.push_back(seg);
        }
    }
    c.validate();
    return c;
}

std::string SynthConfig::to_json() const {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : segments) {
        segs.push_back({{"kind", to_string(s.kind)},
                        {"variable", s.variable},
                        {"start", s.start},
                        {"length", s.length},
                        {"magnitude", s.magnitude}});
    }
    nlohmann::json kinds_j = nlohmann::json::array();
    for (auto k : kinds) kinds_j.push_back(to_string(k));
    nlohmann::json j{{"n_continuous", n_continuous}, {"n_discrete", n_discrete},
                     {"t_train", t_train},           {"t_test", t_test},
                     {"noise_std", noise_std},       {"seed", seed},
                     {"anomaly_rate", anomaly_rate}, {"kinds", kinds_j},
                     {"segments", segs}};
    return j.dump(2);
}

namespace {

VariableSchema make_schema(const SynthConfig& c) {
    VariableSchema schema;
    for (std::size_t i = 0; i < c.n_continuous; ++i) {
        schema.entries.push_back({"s" + std::to_string(i), VariableKind::Continuous});
    }
    for (std::size_t k = 0; k < c.n_discrete; ++k) {
        schema.entries.push_back({"a" + std::to_string(k), VariableKind::Discrete});
    }
    return schema;
}

/// Automatic placement: one segment per configured kind, evenly spaced,
/// sized so the labeled rows total ~ anomaly_rate * t_test.
std::vector<AnomalySegment> auto_segments(const SynthConfig& c) {
    const std::size_t n_seg = c.kinds.size();
    const std::size_t total = static_cast<std::size_t>(
        std::llround(c.anomaly_rate * static_cast<double>(c.t_test)));
    if (total < n_seg) throw ConfigError("anomaly_rate too small for the configured kinds");
    std::vector<AnomalySegment> segs;
    for (std::size_t i = 0; i < n_seg; ++i) {
        AnomalySegment seg;
        seg.kind = c.kinds[i];
        seg.length = total / n_seg + (i < total % n_seg ? 1 : 0);
        // Kind-specific default targets; stuck/break hit sensors that drive an
        // actuator so the fault shows up through cross-variable structure.
        switch (seg.kind) {
            case AnomalyKind::Spike:
                seg.variable = 0;
                break;
            case AnomalyKind::StuckAt:
                seg.variable = std::min<std::size_t>(3, c.n_continuous - 1);
                break;
            case AnomalyKind::ActuatorFlip:
                seg.variable = c.n_continuous;  // a0
                break;
            case AnomalyKind::CorrelationBreak:
                seg.variable = std::min<std::size_t>(1, c.n_continuous - 1);
                break;
        }
        const double center = (static_cast<double>(i) + 0.5) *
                              static_cast<double>(c.t_test) / static_cast<double>(n_seg);
        std::size_t start = static_cast<std::size_t>(
            std::max(0.0, center - static_cast<double>(seg.length) / 2.0));
        start = std::max(start, kAutoSegmentMargin);
        start = std::min(start, c.t_test - seg.length);
        seg.start = start;
        segs.push_back(seg);
    }
    return segs;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::size_t n_c = config.n_continuous;
    const std::size_t n_d = config.n_discrete;
    const std::size_t L = n_c + n_d;
    const std::size_t t_total = config.t_train + config.t_test;

    // Per-driver phases, then per-variable gains/offsets, then the break
    // driver phase: fixed draw order keeps the generator reproducible.
    double phase[2] = {unit(rng) * kTwoPi, unit(rng) * kTwoPi};
    std::vector<ContinuousSpec> cont(n_c);
    for (std::size_t i = 0; i < n_c; ++i) {
        cont[i].driver = i % 2;
        cont[i].gain = 0.8 + 0.4 * unit(rng);
        cont[i].offset = -0.2 + 0.4 * unit(rng);
    }
    const double break_phase = unit(rng) * kTwoPi;

    std::vector<DiscreteRule> rules(n_d);
    for (std::size_t k = 0; k < n_d; ++k) {
        DiscreteRule& r = rules[k];
        r.source = k % n_c;
        r.lag = kActuatorLag;
        if (k == 1 && n_d >= 2) {
            // One three-level actuator to exercise multi-level categories.
            r.thresholds = {cont[r.source].offset - 0.5 * cont[r.source].gain,
                            cont[r.source].offset + 0.5 * cont[r.source].gain};
        } else {
            r.thresholds = {cont[r.source].offset};
        }
    }

    auto clean_value = [&](std::size_t var, std::size_t t_global) {
        const ContinuousSpec& s = cont[var];
        const double g = std::sin(kTwoPi * static_cast<double>(t_global) /
                                      kPeriods[s.driver] + phase[s.driver]);
        return s.offset + s.gain * g;
    };
    auto discrete_level = [&](std::size_t k, std::size_t t_global) {
        const DiscreteRule& r = rules[k];
        const std::size_t t_src = t_global >= r.lag ? t_global - r.lag : 0;
        const double v = clean_value(r.source, t_src);
        int level = 0;
        for (double th : r.thresholds) {
            if (v > th) ++level;
        }
        return static_cast<double>(level);
    };

    // Full normal trajectory, train followed by test.
    std::vector<double> values(t_total * L);
    for (std::size_t t = 0; t < t_total; ++t) {
        for (std::size_t i = 0; i < n_c; ++i) {
            values[t * L + i] = clean_value(i, t) + config.noise_std * noise(rng);
        }
        for (std::size_t k = 0; k < n_d; ++k) {
            values[t * L + n_c + k] = discrete_level(k, t);
        }
    }

    SynthResult result;
    result.discrete_rules = rules;
    result.segments = config.segments.empty() ? auto_segments(config) : config.segments;

    result.train.schema = make_schema(config);
    result.train.rows = config.t_train;
    result.train.values.assign(values.begin(), values.begin() + config.t_train * L);

    result.test.schema = result.train.schema;
    result.test.rows = config.t_test;
    result.test.values.assign(values.begin() + config.t_train * L, values.end());
    std::vector<int> labels(config.t_test, 0);

    for (const auto& seg : result.segments) {
        const std::size_t v = seg.variable;
        const double frozen = result.test.at(seg.start, v);
        for (std::size_t t = seg.start; t < seg.start + seg.length; ++t) {
            switch (seg.kind) {
                case AnomalyKind::Spike:
                    result.test.at(t, v) += seg.magnitude;
                    break;
                case AnomalyKind::StuckAt:
                    result.test.at(t, v) = frozen;
                    break;
                case AnomalyKind::ActuatorFlip: {
                    const std::size_t k = v - n_c;
                    const int n_levels = static_cast<int>(rules[k].thresholds.size()) + 1;
                    const int level = static_cast<int>(result.test.at(t, v));
                    result.test.at(t, v) = static_cast<double>((level + 1) % n_levels);
                    break;
                }
                case AnomalyKind::CorrelationBreak: {
                    const std::size_t t_global = config.t_train + t;
                    result.test.at(t, v) =
                        cont[v].offset +
                        cont[v].gain * std::sin(kTwoPi * static_cast<double>(t_global) /
                                                    kBreakPeriod + break_phase) +
                        config.noise_std * noise(rng);
                    break;
                }
            }
            labels[t] = 1;
        }
    }
    for (int l : labels) result.label_count += static_cast<std::size_t>(l);
    result.test.labels = std::move(labels);
    return result;
}

std::string synth_truth_json(const SynthResult& result, const SynthConfig& config) {
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : result.segments) {
        segs.push_back({{"kind", to_string(s.kind)},
                        {"variable", s.variable},
                        {"variable_name", result.test.schema[s.variable].name},
                        {"start", s.start},
                        {"length", s.length},
                        {"magnitude", s.magnitude}});
    }
    nlohmann::json rules = nlohmann::json::array();
    for (std::size_t k = 0; k < result.discrete_rules.size(); ++k) {
        const auto& r = result.discrete_rules[k];
        rules.push_back({{"actuator", result.test.schema[config.n_continuous + k].name},
                         {"source", result.test.schema[r.source].name},
                         {"source_index", r.source},
                         {"thresholds", r.thresholds},
                         {"lag", r.lag}});
    }
    nlohmann::json j{{"segments", segs},
                     {"discrete_rules", rules},
                     {"label_count", result.label_count},
                     {"t_test", result.test.rows},
                     {"label_rate", result.test.rows == 0
                                        ? 0.0
                                        : static_cast<double>(result.label_count) /
                                              static_cast<double>(result.test.rows)},
                     {"seed", config.seed}};
    return j.dump(2);
}

}  // namespace hgad
