#include "mhm/grad_check.hpp"

#include "mhm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mhm {

GradCheckReport grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
    std::vector<bool> previous_flags;
    for (auto& t : inputs) {
        previous_flags.push_back(t.requires_grad());
        t.set_requires_grad(true);
        t.zero_grad();
    }
    clear_tape();
    Tensor out = f();
    if (out.size() != 1) {
        clear_tape();
        throw ShapeError("grad_check: function must return a scalar, got " + shape_str(out.shape()));
    }
    backward(out);

    GradCheckReport report;
    Rng rng(options.seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& t = inputs[k];
        std::vector<double> analytic(t.size(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());

        std::vector<std::size_t> idx(t.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        if (options.max_elements_per_input && idx.size() > options.max_elements_per_input) {
            for (std::size_t i = 0; i < options.max_elements_per_input; ++i) {
                std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
            }
            idx.resize(options.max_elements_per_input);
        }

        NoGradGuard no_grad;
        for (std::size_t i : idx) {
            const double saved = t[i];
            t[i] = saved + options.eps;
            const double fp = f().item();
            t[i] = saved - options.eps;
            const double fm = f().item();
            t[i] = saved;
            const double numeric = (fp - fm) / (2.0 * options.eps);
            const double a = analytic[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            const double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error || std::isnan(rel)) {
                report.max_rel_error = std::isnan(rel) ? INFINITY : rel;
                report.worst_input = k;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    for (std::size_t k = 0; k < inputs.size(); ++k) inputs[k].set_requires_grad(previous_flags[k]);
    return report;
}

}  // namespace mhm
