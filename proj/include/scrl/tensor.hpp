#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace scrl::nn {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dense 64-bit float tensor node in a reverse-mode autodiff graph.
// Tensors are cheap handles onto a shared node; ops build the graph
// eagerly and Tensor::backward() runs the tape in reverse topological
// order. Gradient buffers are allocated lazily and only on nodes that
// require grad, so frozen parameters never own one.
class Tensor {
public:
    struct Node {
        std::vector<int> shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty unless requires_grad and touched
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward_fn;  // accumulates into parents

        size_t numel() const { return data.size(); }
        void ensure_grad() {
            if (grad.empty()) grad.assign(data.size(), 0.0);
        }
    };

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value,
                       bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    size_t numel() const { return node_->data.size(); }
    int dim(int i) const { return node_->shape.at(i); }
    int ndim() const { return int(node_->shape.size()); }

    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    double value() const;  // scalar tensors only

    // Same storage view without graph history; gradients stop here.
    Tensor detach() const;

    // Runs reverse-mode accumulation from this scalar node.
    void backward();

    // Clears gradient buffers reachable from this node's graph.
    void zero_grad();

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

size_t numel_of(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);
void check_same_shape(const Tensor& a, const Tensor& b, const char* what);

// Elementwise / reduction primitives.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sum_all(const Tensor& a);  // -> scalar

}  // namespace scrl::nn
