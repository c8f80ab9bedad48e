#include "mhm/coattention.hpp"

#include <cmath>

namespace mhm {

namespace {

void check_pair(const Tensor& dx, const Tensor& dy, const char* op) {
    if (dx.rank() != 2 || dy.rank() != 2 || dx.dim(0) != dy.dim(1) || dx.dim(1) != dy.dim(0)) {
        throw ShapeError(std::string(op) + ": shape of dx must equal shape of dy^T, got dx " + shape_str(dx.shape()) +
                         " and dy " + shape_str(dy.shape()));
    }
}

}  // namespace

CoAttentionParams CoAttentionParams::make(std::size_t r, double gamma, Rng& rng) {
    CoAttentionParams p;
    p.P = Tensor({r, r}, true);
    p.Q = Tensor({r, r}, true);
    for (auto* t : {&p.P, &p.Q}) {
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < r; ++j) (*t)[i * r + j] = (i == j ? 1.0 : 0.0) + 0.01 * rng.normal();
    }
    p.gamma = gamma;
    return p;
}

void CoAttentionParams::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".P", P);
    out.emplace_back(prefix + ".Q", Q);
}

std::pair<Tensor, Tensor> affinities(const Tensor& dx, const Tensor& dy, const CoAttentionParams& params) {
    check_pair(dx, dy, "affinities");
    const std::size_t r = dx.dim(1);
    if (params.P.shape() != Shape{r, r} || params.Q.shape() != Shape{r, r}) {
        throw ShapeError("affinities: P and Q must be " + std::to_string(r) + "x" + std::to_string(r) + ", got " +
                         shape_str(params.P.shape()) + " and " + shape_str(params.Q.shape()));
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(params.d()));
    Tensor w_xy = softmax_rows(scale(matmul(matmul(transpose(dy), params.P), transpose(dx)), norm));
    Tensor w_yx = softmax_rows(scale(matmul(matmul(dx, params.Q), dy), norm));
    return {w_xy, w_yx};
}

std::pair<Tensor, Tensor> fuse(const Tensor& dx, const Tensor& dy, const Tensor& w_xy, const Tensor& w_yx,
                               double gamma) {
    check_pair(dx, dy, "fuse");
    const std::size_t c = dx.dim(0);
    if (w_xy.shape() != Shape{c, c} || w_yx.shape() != Shape{c, c}) {
        throw ShapeError("fuse: affinities must be " + std::to_string(c) + "x" + std::to_string(c) + ", got " +
                         shape_str(w_xy.shape()) + " and " + shape_str(w_yx.shape()));
    }
    if (gamma == 0.0) return {dx, dy};
    Tensor dx2 = add(dx, scale(matmul(w_yx, transpose(dy)), gamma));
    Tensor dy2 = add(dy, scale(transpose(matmul(w_xy, dx)), gamma));
    return {dx2, dy2};
}

AxisFeatures coattention_forward(const AxisFeatures& features, const CoAttentionParams& params) {
    if (features.channels() == 0 || features.dx.size() != features.dy.size()) {
        throw ShapeError("coattention_forward: need K >= 1 matching dx/dy channels, got " +
                         std::to_string(features.dx.size()) + " and " + std::to_string(features.dy.size()));
    }
    AxisFeatures out;
    out.dx.reserve(features.channels());
    out.dy.reserve(features.channels());
    for (std::size_t k = 0; k < features.channels(); ++k) {
        if (params.gamma == 0.0) {
            check_pair(features.dx[k], features.dy[k], "coattention_forward");
            out.dx.push_back(features.dx[k]);
            out.dy.push_back(features.dy[k]);
            continue;
        }
        auto [w_xy, w_yx] = affinities(features.dx[k], features.dy[k], params);
        auto [dx2, dy2] = fuse(features.dx[k], features.dy[k], w_xy, w_yx, params.gamma);
        out.dx.push_back(std::move(dx2));
        out.dy.push_back(std::move(dy2));
    }
    return out;
}

}  // namespace mhm
