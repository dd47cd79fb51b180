#pragma once

#include "scrl/tensor.hpp"

namespace scrl::nn::detail {

inline Tensor make_op(std::vector<int> shape, std::vector<double> data,
                      std::vector<Tensor> parents,
                      std::function<void(Tensor::Node&)> backward_fn) {
    auto n = std::make_shared<Tensor::Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    for (auto& p : parents) {
        n->parents.push_back(p.node());
        n->requires_grad = n->requires_grad || p.requires_grad();
    }
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return Tensor(n);
}

inline void accumulate(Tensor::Node& parent, const std::vector<double>& delta) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    for (size_t i = 0; i < delta.size(); ++i) parent.grad[i] += delta[i];
}

}  // namespace scrl::nn::detail
