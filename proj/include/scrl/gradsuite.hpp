#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scrl::nn {

struct SuiteCase {
    std::string name;
    double max_rel_error = 0.0;
};

struct SuiteResult {
    std::vector<SuiteCase> cases;

    double worst() const;
    bool passed(double tol) const { return worst() < tol; }
};

// Finite-difference checks for every differentiable operator plus the
// full symmetrized training loss on a tiny two-stage model (batch 2,
// two regions per image, 8x8 inputs).
SuiteResult run_gradient_suite(uint64_t seed);

}  // namespace scrl::nn
