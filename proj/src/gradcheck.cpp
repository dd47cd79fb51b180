#include "scrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scrl::nn {

GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                           const std::vector<Parameter*>& params,
                           double step, int coords_per_param, Rng& rng) {
    Tensor loss = build_loss();
    if (!std::isfinite(loss.value()))
        throw std::runtime_error("grad_check: loss is not finite");
    loss.backward();

    // Snapshot analytic gradients before perturbing anything.
    std::vector<std::vector<double>> analytic;
    for (Parameter* p : params) {
        if (!p->tensor.has_grad())
            throw std::runtime_error("grad_check: no gradient on " + p->name);
        analytic.push_back(p->tensor.grad());
    }

    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter* p = params[pi];
        size_t n = p->tensor.numel();
        int trials = std::min<size_t>(coords_per_param, n);
        for (int t = 0; t < trials; ++t) {
            size_t i = trials == int(n) ? size_t(t)
                                        : size_t(rng.uniform_int(n));
            double orig = p->tensor.data()[i];
            p->tensor.data()[i] = orig + step;
            double f_plus = build_loss().value();
            p->tensor.data()[i] = orig - step;
            double f_minus = build_loss().value();
            p->tensor.data()[i] = orig;
            if (!std::isfinite(f_plus) || !std::isfinite(f_minus))
                throw std::runtime_error("grad_check: non-finite probe on " +
                                         p->name);
            double fd = (f_plus - f_minus) / (2.0 * step);
            double g = analytic[pi][i];
            double rel =
                std::fabs(fd - g) /
                std::max({std::fabs(fd), std::fabs(g), 1e-2});
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p->name;
                report.worst_coord = int(i);
            }
        }
    }
    return report;
}

}  // namespace scrl::nn
