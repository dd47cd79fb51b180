#include "scrl/rng.hpp"

#include <cmath>

namespace scrl {

double Rng::normal() {
    // Rejection-free Box-Muller; discard the second value.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace scrl
