#pragma once

#include "mhm/checkpoint.hpp"
#include "mhm/rng.hpp"
#include "mhm/tensor.hpp"

#include <utility>
#include <vector>

namespace mhm {

/// Trainable r x r matrices P, Q shared by all channels; gamma is fixed per
/// experiment and d = r.
struct CoAttentionParams {
    Tensor P;
    Tensor Q;
    double gamma = 0.4;

    /// Identity plus seeded N(0, 0.01^2) noise.
    static CoAttentionParams make(std::size_t r, double gamma, Rng& rng);
    std::size_t d() const { return P.dim(1); }
    void collect(const std::string& prefix, NamedTensors& out) const;
};

/// Per-channel distributional features of the two axes.
/// dx[k] is c x r (rows are x positions), dy[k] is r x c (columns are y positions).
struct AxisFeatures {
    std::vector<Tensor> dx;
    std::vector<Tensor> dy;

    std::size_t channels() const { return dx.size(); }
};

/// Returns (W_xy, W_yx), both c x c and row-stochastic:
///   W_xy = softmax_rows(dy^T P dx^T / sqrt(d)),  W_yx = softmax_rows(dx Q dy / sqrt(d)).
std::pair<Tensor, Tensor> affinities(const Tensor& dx, const Tensor& dy, const CoAttentionParams& params);

/// dx' = dx + gamma * W_yx dy^T,  dy' = dy + gamma * (W_xy dx)^T.
/// gamma == 0 returns the inputs unchanged.
std::pair<Tensor, Tensor> fuse(const Tensor& dx, const Tensor& dy, const Tensor& w_xy, const Tensor& w_yx,
                               double gamma);

AxisFeatures coattention_forward(const AxisFeatures& features, const CoAttentionParams& params);

}  // namespace mhm
