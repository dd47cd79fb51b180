#include "scrl/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace scrl::train {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd-momentum") return OptimizerKind::SgdMomentum;
    if (s == "lars") return OptimizerKind::Lars;
    throw std::invalid_argument("unknown optimizer '" + s +
                                "' (expected sgd-momentum or lars)");
}

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::SgdMomentum ? "sgd-momentum" : "lars";
}

Optimizer::Optimizer(OptimConfig cfg,
                     const std::vector<model::NamedParam>& params)
    : cfg_(cfg) {
    velocity_.reserve(params.size());
    for (const auto& p : params)
        velocity_.emplace_back(p.tensor.numel(), 0.0);
}

void Optimizer::set_velocity(std::vector<std::vector<double>> v) {
    if (v.size() != velocity_.size())
        throw std::invalid_argument("set_velocity: record count mismatch");
    for (size_t i = 0; i < v.size(); ++i)
        if (v[i].size() != velocity_[i].size())
            throw std::invalid_argument("set_velocity: size mismatch at " +
                                        std::to_string(i));
    velocity_ = std::move(v);
}

double Optimizer::step(std::vector<model::NamedParam>& params, double lr) {
    if (params.size() != velocity_.size())
        throw std::logic_error("Optimizer: parameter set changed");
    double grad_sq = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& t = params[pi].tensor;
        if (!t.has_grad())
            continue;  // parameter unused by this step's graph
        auto& w = t.data();
        auto& g = t.grad();
        auto& v = velocity_[pi];
        bool adapt = t.ndim() > 1;  // biases and BN params: plain SGD, no wd
        double wd = adapt ? cfg_.weight_decay : 0.0;

        double local_lr = lr;
        if (cfg_.kind == OptimizerKind::Lars && adapt) {
            double wn = 0.0, gn = 0.0;
            for (size_t i = 0; i < w.size(); ++i) {
                wn += w[i] * w[i];
                gn += g[i] * g[i];
            }
            wn = std::sqrt(wn);
            gn = std::sqrt(gn);
            if (wn > 0.0 && gn > 0.0)
                local_lr = lr * cfg_.trust_coeff * wn /
                           (gn + wd * wn + cfg_.eps);
        }
        for (size_t i = 0; i < w.size(); ++i) {
            double gi = g[i] + wd * w[i];
            grad_sq += g[i] * g[i];
            v[i] = cfg_.momentum * v[i] + gi;
            w[i] -= local_lr * v[i];
        }
        std::fill(g.begin(), g.end(), 0.0);
    }
    return std::sqrt(grad_sq);
}

double lr_at(const ScheduleConfig& s, int64_t step) {
    if (step < 0 || step > s.total_steps)
        throw std::out_of_range("lr_at: step outside [0, total]");
    if (s.warmup_steps > 0 && step < s.warmup_steps)
        return s.lr0 * double(step) / double(s.warmup_steps);
    int64_t t = step - s.warmup_steps;
    int64_t span = std::max<int64_t>(1, s.total_steps - s.warmup_steps);
    return s.lr0 * 0.5 * (1.0 + std::cos(M_PI * double(t) / double(span)));
}

double tau_at(const ScheduleConfig& s, int64_t step) {
    if (step < 0 || step > s.total_steps)
        throw std::out_of_range("tau_at: step outside [0, total]");
    double ramp = (std::cos(M_PI * double(step) / double(s.total_steps)) + 1.0) / 2.0;
    return 1.0 - (1.0 - s.tau0) * ramp;
}

}  // namespace scrl::train
