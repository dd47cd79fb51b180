#include "scrl/tensor.hpp"

#include <algorithm>

#include "scrl/detail/autodiff_utils.hpp"
#include <sstream>
#include <unordered_set>

namespace scrl::nn {

size_t numel_of(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
        n *= size_t(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->data.assign(numel_of(shape), 0.0);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
    if (numel_of(shape) != data.size())
        throw ShapeError("from_data: " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

double Tensor::value() const {
    if (numel() != 1) throw ShapeError("value(): tensor is not scalar");
    return node_->data[0];
}

Tensor Tensor::detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->data = node_->data;
    n->requires_grad = false;
    return Tensor(n);
}

namespace {

void topo_visit(const std::shared_ptr<Tensor::Node>& n,
                std::unordered_set<Tensor::Node*>& seen,
                std::vector<std::shared_ptr<Tensor::Node>>& order) {
    if (!n->requires_grad || seen.count(n.get())) return;
    seen.insert(n.get());
    for (auto& p : n->parents) topo_visit(p, seen, order);
    order.push_back(n);
}

}  // namespace

void Tensor::backward() {
    if (numel() != 1) throw ShapeError("backward(): root must be scalar");
    if (!node_->requires_grad) return;
    std::unordered_set<Node*> seen;
    std::vector<std::shared_ptr<Node>> order;
    topo_visit(node_, seen, order);
    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

void Tensor::zero_grad() {
    std::unordered_set<Node*> seen;
    std::vector<std::shared_ptr<Node>> order;
    topo_visit(node_, seen, order);
    for (auto& n : order) std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

using detail::accumulate;
using detail::make_op;

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        accumulate(*n.parents[0], n.grad);
        accumulate(*n.parents[1], n.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        accumulate(*n.parents[0], n.grad);
        if (n.parents[1]->requires_grad) {
            n.parents[1]->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                n.parents[1]->grad[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_op(a.shape(), std::move(out), {a, b}, [](Tensor::Node& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                pa.grad[i] += n.grad[i] * pb.data[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                pb.grad[i] += n.grad[i] * pa.data[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    return make_op(a.shape(), std::move(out), {a}, [s](Tensor::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i] * s;
    });
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_op({1}, {s}, {a}, [](Tensor::Node& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < p.grad.size(); ++i) p.grad[i] += n.grad[0];
    });
}

}  // namespace scrl::nn
