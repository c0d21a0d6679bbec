#pragma once

#include <string>

#include "hgad/detector.hpp"
#include "hgad/model.hpp"
#include "hgad/series.hpp"

namespace hgad {

/// Self-describing trained-model bundle: schema, dimensions, ablation, every
/// parameter array, the training normalizer, and the score calibration.
struct Checkpoint {
    ModelParams params;
    Normalizer normalizer;
    Calibration calibration;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

}  // namespace hgad
