#pragma once

#include "mhm/tensor.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mhm {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

struct GradCheckOptions {
    double eps = 1e-5;
    /// Gradients smaller than this are compared on an absolute scale.
    double floor = 1e-3;
    /// When nonzero, check at most this many seeded-random elements per input.
    std::size_t max_elements_per_input = 0;
    std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients of the scalar produced by `f` against
/// central differences, perturbing the elements of `inputs` in place.
///
/// Relative error per element is |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

inline double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double eps) {
    GradCheckOptions o;
    o.eps = eps;
    return grad_check(f, std::move(inputs), o).max_rel_error;
}

}  // namespace mhm
