#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scrl/model.hpp"

namespace scrl::train {

enum class OptimizerKind { SgdMomentum, Lars };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

struct OptimConfig {
    OptimizerKind kind = OptimizerKind::SgdMomentum;
    double momentum = 0.9;
    double weight_decay = 1e-6;
    double trust_coeff = 0.001;  // LARS layer-wise trust coefficient
    double eps = 1e-9;
};

// Momentum optimizer with an optional LARS layer-wise learning-rate
// adaptation. One-dimensional parameters (biases, BN gamma/beta) are
// excluded from both weight decay and the LARS adaptation.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimConfig cfg, const std::vector<model::NamedParam>& params);

    // Applies one update using the gradients currently on the parameters.
    // Gradients are cleared afterwards. Returns the global gradient norm.
    double step(std::vector<model::NamedParam>& params, double lr);

    // Momentum state, indexed like the parameter list; exposed so
    // checkpoints can restore it for exact resume.
    const std::vector<std::vector<double>>& velocity() const {
        return velocity_;
    }
    void set_velocity(std::vector<std::vector<double>> v);

private:
    OptimConfig cfg_;
    std::vector<std::vector<double>> velocity_;
};

struct ScheduleConfig {
    double lr0 = 0.5;
    double tau0 = 0.97;
    int64_t warmup_steps = 0;
    int64_t total_steps = 1;
};

// Linear warmup to lr0, then cosine decay to zero.
double lr_at(const ScheduleConfig& s, int64_t step);

// Cosine ramp of the EMA decay from tau0 at step 0 to 1 at the end.
double tau_at(const ScheduleConfig& s, int64_t step);

}  // namespace scrl::train
