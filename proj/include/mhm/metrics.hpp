#pragma once

#include "mhm/heatmap.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mhm {

enum class NormKind { InterOcular, FaceSize };

struct NormSpec {
    NormKind kind = NormKind::InterOcular;
    std::size_t eye_a = 0;
    std::size_t eye_b = 1;
};

/// Eye centers (0, 1) for 5 points; outer eye corners (36, 45) for 68 points.
NormSpec default_norm(std::size_t N);

/// Inter-ocular distance, or sqrt(width * height) of the ground-truth bounding box.
double normalizer(const LandmarkSet& gt, const NormSpec& spec);

/// Mean per-landmark Euclidean error divided by `norm`, in percent.
double nrmse(const LandmarkSet& pred, const LandmarkSet& gt, double norm);
double nrmse(const LandmarkSet& pred, const LandmarkSet& gt, const NormSpec& spec);

struct LandmarkGroup {
    std::string name;
    std::vector<std::size_t> indices;
};

struct EvalReport {
    std::vector<double> per_sample;
    double mean = 0.0;
    std::vector<std::pair<std::string, double>> groups;
    std::vector<std::pair<std::string, std::string>> config;
};

EvalReport evaluate(const std::vector<LandmarkSet>& preds, const std::vector<LandmarkSet>& gts, const NormSpec& spec,
                    const std::vector<LandmarkGroup>& groups = {});

/// Named regions for the synthetic layouts (eyes/nose/mouth, plus jaw/brows for 68).
std::vector<LandmarkGroup> default_groups(std::size_t N);

/// Formats with 6 significant digits, the precision used by every CSV report.
std::string fmt6(double v);

}  // namespace mhm
