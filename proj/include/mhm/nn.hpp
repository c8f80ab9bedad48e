#pragma once

#include "mhm/checkpoint.hpp"
#include "mhm/rng.hpp"
#include "mhm/tensor.hpp"

#include <string>
#include <vector>

namespace mhm {

/// Fan-in scaled uniform init, bound sqrt(6 / fan_in).
Tensor kaiming_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// 2D convolution layer with per-channel bias.
struct Conv {
    Tensor weight;  // K x C x kh x kw
    Tensor bias;    // K
    Pair stride{1, 1};
    Pair padding{0, 0};

    static Conv make(std::size_t in, std::size_t out, Pair kernel, Pair stride, Pair padding, Rng& rng);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, NamedTensors& out) const;
};

/// Transposed convolution layer (kernel == stride) with per-channel bias.
struct Deconv {
    Tensor weight;  // Ci x Co x kh x kw
    Tensor bias;    // Co
    Pair stride{1, 1};

    /// `gain` scales the initial weights.
    static Deconv make(std::size_t in, std::size_t out, Pair stride, Rng& rng, double gain = 1.0);
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, NamedTensors& out) const;
};

struct AdamOptions {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam(std::vector<Tensor> params, AdamOptions options);

    /// Applies one bias-corrected update from the accumulated gradients.
    void step();
    void zero_grad();
    std::size_t steps() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamOptions opt_;
    std::size_t t_ = 0;
};

std::vector<Tensor> tensors_of(const NamedTensors& named);

}  // namespace mhm
