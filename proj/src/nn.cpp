#include "mhm/nn.hpp"

#include <cmath>

namespace mhm {

Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape), true);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

Conv Conv::make(std::size_t in, std::size_t out, Pair kernel, Pair stride, Pair padding, Rng& rng) {
    Conv c;
    c.weight = kaiming_uniform({out, in, kernel.h, kernel.w}, in * kernel.h * kernel.w, rng);
    c.bias = Tensor({out}, true);
    c.stride = stride;
    c.padding = padding;
    return c;
}

Tensor Conv::operator()(const Tensor& x) const { return add_channel_bias(conv2d(x, weight, stride, padding), bias); }

void Conv::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

Deconv Deconv::make(std::size_t in, std::size_t out, Pair stride, Rng& rng, double gain) {
    Deconv d;
    d.weight = kaiming_uniform({in, out, stride.h, stride.w}, in, rng);
    for (auto& v : d.weight.data()) v = v * gain + 0.0;  // +0.0 turns -0 into 0 when gain is 0
    d.bias = Tensor({out}, true);
    d.stride = stride;
    return d;
}

Tensor Deconv::operator()(const Tensor& x) const { return add_channel_bias(conv_transpose2d(x, weight, stride), bias); }

void Deconv::collect(const std::string& prefix, NamedTensors& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

Adam::Adam(std::vector<Tensor> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto& p = params_[k];
        if (!p.has_grad()) continue;
        auto g = p.grad();
        auto x = p.data();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < x.size(); ++i) {
            m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
            v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
            x[i] -= opt_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt_.epsilon);
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

std::vector<Tensor> tensors_of(const NamedTensors& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

}  // namespace mhm
