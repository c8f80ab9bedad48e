#include "mhm/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace mhm {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

thread_local std::vector<std::function<void()>> g_tape;
thread_local bool g_grad_enabled = true;

using ImplPtr = std::shared_ptr<Tensor::Impl>;

std::vector<double>& grad_of(const ImplPtr& t) {
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    return t->grad;
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!g_grad_enabled) return false;
    return std::any_of(inputs.begin(), inputs.end(), [](const Tensor* t) { return t->requires_grad(); });
}

void record(std::function<void()> fn) { g_tape.push_back(std::move(fn)); }

void require(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
    require(t.defined(), std::string(op) + ": undefined tensor");
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
    }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
    const auto padded = static_cast<long long>(in + 2 * p) - static_cast<long long>(k);
    if (padded < 0 || s == 0) return 0;
    return static_cast<std::size_t>(padded) / s + 1;
}

struct ConvGeom {
    std::size_t C, H, W, K, kh, kw, sh, sw, ph, pw, OH, OW;
};

void im2col(const double* x, const ConvGeom& g, double* cols) {
    const std::size_t ohw = g.OH * g.OW;
    for (std::size_t c = 0; c < g.C; ++c) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                double* row = cols + ((c * g.kh + i) * g.kw + j) * ohw;
                for (std::size_t oh = 0; oh < g.OH; ++oh) {
                    const long long ih = static_cast<long long>(oh * g.sh + i) - static_cast<long long>(g.ph);
                    double* dst = row + oh * g.OW;
                    if (ih < 0 || ih >= static_cast<long long>(g.H)) {
                        std::fill(dst, dst + g.OW, 0.0);
                        continue;
                    }
                    const double* src = x + (c * g.H + static_cast<std::size_t>(ih)) * g.W;
                    for (std::size_t ow = 0; ow < g.OW; ++ow) {
                        const long long iw = static_cast<long long>(ow * g.sw + j) - static_cast<long long>(g.pw);
                        dst[ow] = (iw < 0 || iw >= static_cast<long long>(g.W)) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeom& g, double* dx) {
    const std::size_t ohw = g.OH * g.OW;
    for (std::size_t c = 0; c < g.C; ++c) {
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const double* row = cols + ((c * g.kh + i) * g.kw + j) * ohw;
                for (std::size_t oh = 0; oh < g.OH; ++oh) {
                    const long long ih = static_cast<long long>(oh * g.sh + i) - static_cast<long long>(g.ph);
                    if (ih < 0 || ih >= static_cast<long long>(g.H)) continue;
                    double* dst = dx + (c * g.H + static_cast<std::size_t>(ih)) * g.W;
                    const double* src = row + oh * g.OW;
                    for (std::size_t ow = 0; ow < g.OW; ++ow) {
                        const long long iw = static_cast<long long>(ow * g.sw + j) - static_cast<long long>(g.pw);
                        if (iw >= 0 && iw < static_cast<long long>(g.W)) dst[iw] += src[ow];
                    }
                }
            }
        }
    }
}

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, bool requires_grad) : impl_(std::make_shared<Impl>()) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_str(shape));
    }
    impl_->data.assign(shape_numel(shape), 0.0);
    impl_->shape = std::move(shape);
    impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) : impl_(std::make_shared<Impl>()) {
    for (auto e : shape) {
        if (e == 0) throw ShapeError("tensor extents must be positive: " + shape_str(shape));
    }
    if (data.size() != shape_numel(shape)) {
        throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return impl_->data[0];
}

std::span<double> Tensor::grad() { return grad_of(impl_); }

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t(impl_->shape, impl_->data, impl_->requires_grad);
    return t;
}

// ---------------------------------------------------------------------------
// Tape

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward() needs a scalar loss, got " +
                         (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    if (!loss.requires_grad()) throw std::logic_error("backward(): loss does not require grad");
    grad_of(loss.impl())[0] += 1.0;
    auto tape = std::move(g_tape);
    g_tape.clear();
    for (auto it = tape.rbegin(); it != tape.rend(); ++it) (*it)();
}

void clear_tape() { g_tape.clear(); }
std::size_t tape_size() { return g_tape.size(); }

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    const bool rg = should_record({&a, &b});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), bi = b.impl()] {
            if (o->grad.empty()) return;
            for (const auto& in : {ai, bi}) {
                if (!in->requires_grad) continue;
                auto& g = grad_of(in);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
            }
        });
    }
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    const bool rg = should_record({&a, &b});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), bi = b.impl()] {
            if (o->grad.empty()) return;
            if (ai->requires_grad) {
                auto& g = grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= o->grad[i];
            }
        });
    }
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    const bool rg = should_record({&a, &b});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), bi = b.impl()] {
            if (o->grad.empty()) return;
            if (ai->requires_grad) {
                auto& g = grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * bi->data[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * ai->data[i];
            }
        });
    }
    return r;
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * s;
    const bool rg = should_record({&a});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), s] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * s;
        });
    }
    return r;
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
    const bool rg = should_record({&a});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl()] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (ai->data[i] > 0.0) g[i] += o->grad[i];
            }
        });
    }
    return r;
}

Tensor elu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > 0.0 ? a[i] : std::expm1(a[i]);
    const bool rg = should_record({&a});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl()] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < g.size(); ++i) {
                // d/dx expm1(x) = expm1(x) + 1 = y + 1
                g[i] += ai->data[i] > 0.0 ? o->grad[i] : o->grad[i] * (o->data[i] + 1.0);
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const bool rg = should_record({&a});
    Tensor r({1}, {s}, rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl()] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (auto& v : g) v += o->grad[0];
        });
    }
    return r;
}

Tensor sse(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sse");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    const bool rg = should_record({&a, &b});
    Tensor r({1}, {s}, rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), bi = b.impl()] {
            if (o->grad.empty()) return;
            const double go = o->grad[0];
            if (ai->requires_grad) {
                auto& g = grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * go * (ai->data[i] - bi->data[i]);
            }
            if (bi->requires_grad) {
                auto& g = grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= 2.0 * go * (ai->data[i] - bi->data[i]);
            }
        });
    }
    return r;
}

Tensor mse(const Tensor& a, const Tensor& b) { return scale(sse(a, b), 1.0 / static_cast<double>(a.size())); }

// ---------------------------------------------------------------------------
// Shape manipulation

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    const bool rg = should_record({&a});
    Tensor r(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl()] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
        });
    }
    return r;
}

Tensor transpose(const Tensor& a) {
    require_rank(a, 2, "transpose");
    const std::size_t m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
    const bool rg = should_record({&a});
    Tensor r({n, m}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), m, n] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o->grad[j * m + i];
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(m * n);
    MapMat(out.data(), m, n).noalias() = CMapMat(a.data().data(), m, k) * CMapMat(b.data().data(), k, n);
    const bool rg = should_record({&a, &b});
    Tensor r({m, n}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), bi = b.impl(), m, k, n] {
            if (o->grad.empty()) return;
            CMapMat G(o->grad.data(), m, n);
            if (ai->requires_grad) {
                MapMat(grad_of(ai).data(), m, k).noalias() += G * CMapMat(bi->data.data(), k, n).transpose();
            }
            if (bi->requires_grad) {
                MapMat(grad_of(bi).data(), k, n).noalias() += CMapMat(ai->data.data(), m, k).transpose() * G;
            }
        });
    }
    return r;
}

Tensor softmax_rows(const Tensor& a) {
    require_rank(a, 2, "softmax_rows");
    const auto m = a.dim(0), n = a.dim(1);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = a.data().data() + i * n;
        double* dst = out.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            dst[j] = std::exp(row[j] - mx);
            z += dst[j];
        }
        for (std::size_t j = 0; j < n; ++j) dst[j] /= z;
    }
    const bool rg = should_record({&a});
    Tensor r(a.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), ai = a.impl(), m, n] {
            if (o->grad.empty()) return;
            auto& g = grad_of(ai);
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = o->data.data() + i * n;
                const double* gy = o->grad.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += y[j] * gy[j];
                for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
            }
        });
    }
    return r;
}

// ---------------------------------------------------------------------------
// Convolutions

Tensor conv2d(const Tensor& x, const Tensor& kernel, Pair stride, Pair padding) {
    require_rank(x, 3, "conv2d");
    require_rank(kernel, 4, "conv2d kernel");
    if (kernel.dim(1) != x.dim(0)) {
        throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input is " + shape_str(x.shape()));
    }
    if (stride.h == 0 || stride.w == 0) throw ShapeError("conv2d: stride must be positive");
    ConvGeom g{x.dim(0), x.dim(1), x.dim(2), kernel.dim(0), kernel.dim(2), kernel.dim(3),
               stride.h, stride.w, padding.h, padding.w, 0, 0};
    g.OH = conv_extent(g.H, g.kh, g.sh, g.ph);
    g.OW = conv_extent(g.W, g.kw, g.sw, g.pw);
    if (g.OH == 0 || g.OW == 0) {
        throw ShapeError("conv2d: non-positive output extent for input " + shape_str(x.shape()) + " and kernel " +
                         shape_str(kernel.shape()));
    }
    const std::size_t ckk = g.C * g.kh * g.kw, ohw = g.OH * g.OW;
    auto cols = std::make_shared<std::vector<double>>(ckk * ohw);
    im2col(x.data().data(), g, cols->data());
    std::vector<double> out(g.K * ohw);
    MapMat(out.data(), g.K, ohw).noalias() = CMapMat(kernel.data().data(), g.K, ckk) * CMapMat(cols->data(), ckk, ohw);
    const bool rg = should_record({&x, &kernel});
    Tensor r({g.K, g.OH, g.OW}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), xi = x.impl(), ki = kernel.impl(), cols, g, ckk, ohw] {
            if (o->grad.empty()) return;
            CMapMat G(o->grad.data(), g.K, ohw);
            if (ki->requires_grad) {
                MapMat(grad_of(ki).data(), g.K, ckk).noalias() += G * CMapMat(cols->data(), ckk, ohw).transpose();
            }
            if (xi->requires_grad) {
                std::vector<double> dcols(ckk * ohw);
                MapMat(dcols.data(), ckk, ohw).noalias() = CMapMat(ki->data.data(), g.K, ckk).transpose() * G;
                col2im_add(dcols.data(), g, grad_of(xi).data());
            }
        });
    }
    return r;
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& kernel, Pair stride) {
    require_rank(x, 3, "conv_transpose2d");
    require_rank(kernel, 4, "conv_transpose2d kernel");
    if (stride.h < 1 || stride.w < 1) throw ShapeError("conv_transpose2d: stride must be >= 1");
    if (kernel.dim(0) != x.dim(0)) {
        throw ShapeError("conv_transpose2d: kernel " + shape_str(kernel.shape()) + " expects " +
                         std::to_string(kernel.dim(0)) + " input channels, input is " + shape_str(x.shape()));
    }
    if (kernel.dim(2) != stride.h || kernel.dim(3) != stride.w) {
        throw ShapeError("conv_transpose2d: kernel extent " + shape_str(kernel.shape()) +
                         " must equal the stride (" + std::to_string(stride.h) + "," + std::to_string(stride.w) + ")");
    }
    const std::size_t Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
    const std::size_t Co = kernel.dim(1), kh = stride.h, kw = stride.w;
    const std::size_t hw = H * W, okk = Co * kh * kw;
    const std::size_t OH = H * kh, OW = W * kw;
    // cols[(co*kh + i)*kw + j][h*W + w] = sum_ci kernel[ci][co][i][j] * x[ci][h][w]
    std::vector<double> cols(okk * hw);
    MapMat(cols.data(), okk, hw).noalias() =
        CMapMat(kernel.data().data(), Ci, okk).transpose() * CMapMat(x.data().data(), Ci, hw);
    std::vector<double> out(Co * OH * OW);
    for (std::size_t co = 0; co < Co; ++co)
        for (std::size_t i = 0; i < kh; ++i)
            for (std::size_t j = 0; j < kw; ++j) {
                const double* src = cols.data() + ((co * kh + i) * kw + j) * hw;
                for (std::size_t h = 0; h < H; ++h)
                    for (std::size_t w = 0; w < W; ++w) out[(co * OH + h * kh + i) * OW + w * kw + j] = src[h * W + w];
            }
    const bool rg = should_record({&x, &kernel});
    Tensor r({Co, OH, OW}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), xi = x.impl(), ki = kernel.impl(), Ci, H, W, Co, kh, kw, hw, okk, OH, OW] {
            if (o->grad.empty()) return;
            std::vector<double> gcols(okk * hw);
            for (std::size_t co = 0; co < Co; ++co)
                for (std::size_t i = 0; i < kh; ++i)
                    for (std::size_t j = 0; j < kw; ++j) {
                        double* dst = gcols.data() + ((co * kh + i) * kw + j) * hw;
                        for (std::size_t h = 0; h < H; ++h)
                            for (std::size_t w = 0; w < W; ++w)
                                dst[h * W + w] = o->grad[(co * OH + h * kh + i) * OW + w * kw + j];
                    }
            CMapMat G(gcols.data(), okk, hw);
            if (xi->requires_grad) {
                MapMat(grad_of(xi).data(), Ci, hw).noalias() += CMapMat(ki->data.data(), Ci, okk) * G;
            }
            if (ki->requires_grad) {
                MapMat(grad_of(ki).data(), Ci, okk).noalias() += CMapMat(xi->data.data(), Ci, hw) * G.transpose();
            }
        });
    }
    return r;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require(x.defined() && x.rank() >= 1, "add_channel_bias: input must have a channel axis");
    require_rank(bias, 1, "add_channel_bias bias");
    if (bias.dim(0) != x.dim(0)) {
        throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) + " vs input " + shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0), inner = x.size() / C;
    std::vector<double> out(x.size());
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < inner; ++i) out[c * inner + i] = x[c * inner + i] + bias[c];
    const bool rg = should_record({&x, &bias});
    Tensor r(x.shape(), std::move(out), rg);
    if (rg) {
        record([o = r.impl(), xi = x.impl(), bi = bias.impl(), C, inner] {
            if (o->grad.empty()) return;
            if (xi->requires_grad) {
                auto& g = grad_of(xi);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = grad_of(bi);
                for (std::size_t c = 0; c < C; ++c) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < inner; ++i) s += o->grad[c * inner + i];
                    g[c] += s;
                }
            }
        });
    }
    return r;
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
    require_rank(x, 3, "upsample_nearest");
    require(factor >= 1, "upsample_nearest: factor must be >= 1");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2), OH = H * factor, OW = W * factor;
    std::vector<double> out(C * OH * OW);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t oh = 0; oh < OH; ++oh)
            for (std::size_t ow = 0; ow < OW; ++ow)
                out[(c * OH + oh) * OW + ow] = x[(c * H + oh / factor) * W + ow / factor];
    const bool rg = should_record({&x});
    Tensor r({C, OH, OW}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), xi = x.impl(), C, H, W, OH, OW, factor] {
            if (o->grad.empty()) return;
            auto& g = grad_of(xi);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t oh = 0; oh < OH; ++oh)
                    for (std::size_t ow = 0; ow < OW; ++ow)
                        g[(c * H + oh / factor) * W + ow / factor] += o->grad[(c * OH + oh) * OW + ow];
        });
    }
    return r;
}

Tensor channel(const Tensor& x, std::size_t k) {
    require_rank(x, 3, "channel");
    if (k >= x.dim(0)) {
        throw ShapeError("channel: index " + std::to_string(k) + " out of range for " + shape_str(x.shape()));
    }
    const std::size_t H = x.dim(1), W = x.dim(2), off = k * H * W;
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(off),
                            x.data().begin() + static_cast<std::ptrdiff_t>(off + H * W));
    const bool rg = should_record({&x});
    Tensor r({H, W}, std::move(out), rg);
    if (rg) {
        record([o = r.impl(), xi = x.impl(), off] {
            if (o->grad.empty()) return;
            auto& g = grad_of(xi);
            for (std::size_t i = 0; i < o->grad.size(); ++i) g[off + i] += o->grad[i];
        });
    }
    return r;
}

Tensor stack(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "stack: no inputs");
    for (const auto& p : parts) {
        require_rank(p, 2, "stack");
        require_same(p, parts.front(), "stack");
    }
    const std::size_t C = parts.size(), H = parts[0].dim(0), W = parts[0].dim(1), hw = H * W;
    std::vector<double> out(C * hw);
    bool rg = false;
    for (std::size_t c = 0; c < C; ++c) {
        std::copy(parts[c].data().begin(), parts[c].data().end(), out.begin() + static_cast<std::ptrdiff_t>(c * hw));
        rg = rg || parts[c].requires_grad();
    }
    rg = rg && g_grad_enabled;
    Tensor r({C, H, W}, std::move(out), rg);
    if (rg) {
        std::vector<ImplPtr> ins;
        ins.reserve(C);
        for (const auto& p : parts) ins.push_back(p.impl());
        record([o = r.impl(), ins = std::move(ins), hw] {
            if (o->grad.empty()) return;
            for (std::size_t c = 0; c < ins.size(); ++c) {
                if (!ins[c]->requires_grad) continue;
                auto& g = grad_of(ins[c]);
                for (std::size_t i = 0; i < hw; ++i) g[i] += o->grad[c * hw + i];
            }
        });
    }
    return r;
}

}  // namespace mhm
