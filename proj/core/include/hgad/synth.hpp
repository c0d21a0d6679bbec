#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hgad/series.hpp"

namespace hgad {

enum class AnomalyKind { Spike, StuckAt, ActuatorFlip, CorrelationBreak };

std::string to_string(AnomalyKind kind);
AnomalyKind anomaly_kind_from_string(const std::string& s);

/// One injected anomaly interval on the test frame. `start`/`length` are
/// test-frame row indices; `magnitude` is the additive offset for spikes and
/// is ignored by the other kinds.
struct AnomalySegment {
    AnomalyKind kind = AnomalyKind::Spike;
    std::size_t variable = 0;
    std::size_t start = 0;
    std::size_t length = 0;
    /// Additive offset for spikes, in raw signal units. Sensors swing about
    /// two gain units peak to peak, so 1.6 is a range-scale deviation.
    double magnitude = 1.6;
};

struct SynthConfig {
    std::size_t n_continuous = 8;
    std::size_t n_discrete = 4;
    std::size_t t_train = 5000;
    std::size_t t_test = 2000;
    double noise_std = 0.01;
    std::uint64_t seed = 7;
    /// Explicit segments. When empty, segments are placed automatically from
    /// anomaly_rate, cycling through `kinds`.
    std::vector<AnomalySegment> segments;
    double anomaly_rate = 0.05;
    std::vector<AnomalyKind> kinds = {AnomalyKind::Spike, AnomalyKind::StuckAt,
                                      AnomalyKind::ActuatorFlip,
                                      AnomalyKind::CorrelationBreak};

    void validate() const;
    static SynthConfig from_json_file(const std::string& path);
    std::string to_json() const;
};

/// How a discrete actuator follows its source sensor: the level is the number
/// of thresholds the clean (noise-free) source signal exceeded `lag` steps ago.
struct DiscreteRule {
    std::size_t source = 0;            // continuous variable index
    std::vector<double> thresholds;    // ascending
    std::size_t lag = 2;
};

struct SynthResult {
    SeriesFrame train;  // normal regime only, no labels
    SeriesFrame test;   // labels mark exactly the injected rows
    std::vector<AnomalySegment> segments;  // resolved (auto mode fills these in)
    std::vector<DiscreteRule> discrete_rules;
    std::size_t label_count = 0;
};

/// Deterministic generator: coupled noisy sinusoid sensors plus lagged
/// threshold actuators, with four anomaly kinds injected into the test frame.
/// `seed` overrides config.seed.
SynthResult synth_generate(const SynthConfig& config, std::uint64_t seed);

/// Ground-truth sidecar (segments, rules, label stats) as JSON text.
std::string synth_truth_json(const SynthResult& result, const SynthConfig& config);

}  // namespace hgad
