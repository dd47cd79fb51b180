#pragma once

#include <functional>
#include <string>
#include <vector>

#include "scrl/rng.hpp"
#include "scrl/tensor.hpp"

namespace scrl::nn {

// Named trainable tensor. Non-trainable parameters never receive a
// gradient buffer.
struct Parameter {
    std::string name;
    Tensor tensor;
    bool trainable = true;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    int worst_coord = -1;
};

// Central finite differences against the analytic gradient, on a random
// coordinate subset of each parameter. `build_loss` must rebuild the full
// scalar graph from the current parameter values. The relative error per
// coordinate is |fd - g| / max(|fd|, |g|, 1e-2); the floor keeps
// vanishing gradients from inflating the ratio. Throws on non-finite
// values anywhere.
GradCheckReport grad_check(const std::function<Tensor()>& build_loss,
                           const std::vector<Parameter*>& params,
                           double step, int coords_per_param, Rng& rng);

}  // namespace scrl::nn
