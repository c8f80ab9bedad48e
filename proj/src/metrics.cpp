#include "mhm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace mhm {

NormSpec default_norm(std::size_t N) {
    if (N == 68) return {NormKind::InterOcular, 36, 45};
    return {NormKind::InterOcular, 0, 1};
}

double normalizer(const LandmarkSet& gt, const NormSpec& spec) {
    if (gt.size() == 0) throw std::invalid_argument("normalizer: empty landmark set");
    if (spec.kind == NormKind::InterOcular) {
        if (spec.eye_a >= gt.size() || spec.eye_b >= gt.size() || spec.eye_a == spec.eye_b) {
            throw std::invalid_argument("normalizer: eye indices " + std::to_string(spec.eye_a) + ", " +
                                        std::to_string(spec.eye_b) + " invalid for " + std::to_string(gt.size()) +
                                        " landmarks");
        }
        return std::hypot(gt[spec.eye_a].x - gt[spec.eye_b].x, gt[spec.eye_a].y - gt[spec.eye_b].y);
    }
    double x0 = gt[0].x, x1 = gt[0].x, y0 = gt[0].y, y1 = gt[0].y;
    for (const auto& p : gt.coords) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        y0 = std::min(y0, p.y);
        y1 = std::max(y1, p.y);
    }
    return std::sqrt((x1 - x0) * (y1 - y0));
}

double nrmse(const LandmarkSet& pred, const LandmarkSet& gt, double norm) {
    if (pred.size() != gt.size() || gt.size() == 0) {
        throw std::invalid_argument("nrmse: landmark counts differ (" + std::to_string(pred.size()) + " vs " +
                                    std::to_string(gt.size()) + ")");
    }
    if (!(norm > 0.0)) throw std::invalid_argument("nrmse: normalizer must be positive");
    double total = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) total += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
    return 100.0 * total / static_cast<double>(gt.size()) / norm;
}

double nrmse(const LandmarkSet& pred, const LandmarkSet& gt, const NormSpec& spec) {
    return nrmse(pred, gt, normalizer(gt, spec));
}

EvalReport evaluate(const std::vector<LandmarkSet>& preds, const std::vector<LandmarkSet>& gts, const NormSpec& spec,
                    const std::vector<LandmarkGroup>& groups) {
    if (preds.size() != gts.size() || gts.empty()) {
        throw std::invalid_argument("evaluate: need matching, nonempty prediction and ground-truth lists");
    }
    for (const auto& g : groups) {
        if (g.indices.empty()) throw std::invalid_argument("evaluate: group '" + g.name + "' is empty");
        for (auto i : g.indices) {
            if (i >= gts[0].size()) throw std::invalid_argument("evaluate: group '" + g.name + "' index out of range");
        }
    }
    EvalReport r;
    std::vector<double> group_sum(groups.size(), 0.0);
    for (std::size_t s = 0; s < gts.size(); ++s) {
        const double norm = normalizer(gts[s], spec);
        r.per_sample.push_back(nrmse(preds[s], gts[s], norm));
        for (std::size_t g = 0; g < groups.size(); ++g) {
            double e = 0.0;
            for (auto i : groups[g].indices) e += std::hypot(preds[s][i].x - gts[s][i].x, preds[s][i].y - gts[s][i].y);
            group_sum[g] += 100.0 * e / static_cast<double>(groups[g].indices.size()) / norm;
        }
    }
    r.mean = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) / static_cast<double>(r.per_sample.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        r.groups.emplace_back(groups[g].name, group_sum[g] / static_cast<double>(gts.size()));
    }
    return r;
}

std::vector<LandmarkGroup> default_groups(std::size_t N) {
    auto range = [](std::size_t a, std::size_t b) {
        std::vector<std::size_t> v(b - a);
        std::iota(v.begin(), v.end(), a);
        return v;
    };
    if (N == 5) return {{"eyes", {0, 1}}, {"nose", {2}}, {"mouth", {3, 4}}};
    if (N == 68) {
        return {{"jaw", range(0, 17)},   {"brows", range(17, 27)}, {"nose", range(27, 36)},
                {"eyes", range(36, 48)}, {"mouth", range(48, 68)}};
    }
    return {};
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace mhm
