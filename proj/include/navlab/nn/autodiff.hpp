#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace navlab::nn {

using Shape = std::vector<int>;

int shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated only when requires_grad
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;
    bool requires_grad = false;
    uint64_t id = 0;
};

// Reverse-mode autodiff tensor. Value semantics over a shared node; ops build
// a fresh graph per forward pass that references the persistent parameters.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor param(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int numel() const { return static_cast<int>(node_->value.size()); }
    std::vector<double>& value() { return node_->value; }
    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    double item() const { return node_->value.at(0); }

    std::shared_ptr<TensorNode>& node() { return node_; }
    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// Disables graph recording within scope; forwards run value-only.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// Accumulates gradients of every reachable requires_grad node from a scalar
// loss. Throws if loss is not scalar or carries no graph.
void backward(const Tensor& loss);

// -- layer ops -------------------------------------------------------------

// x [B,I] * w [I,O] + b [O] -> [B,O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x [B,C,H,W], w [F,C,kh,kw], b [F]; stride 1, zero same-padding -> [B,F,H,W]
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor tanh_t(const Tensor& x);
Tensor softplus_t(const Tensor& x);
Tensor exp_t(const Tensor& x);
Tensor log_t(const Tensor& x);
Tensor square(const Tensor& x);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor clamp_t(const Tensor& x, double lo, double hi);  // zero grad outside
Tensor lgamma_t(const Tensor& x);
Tensor digamma_t(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor min_t(const Tensor& a, const Tensor& b);  // ties take a's gradient

Tensor sum_all(const Tensor& x);   // -> [1]
Tensor mean_all(const Tensor& x);  // -> [1]
Tensor row_sum(const Tensor& x);   // [B,N] -> [B]
Tensor global_avg_pool(const Tensor& x);            // [B,C,H,W] -> [B,C]
Tensor concat_cols(std::span<const Tensor> parts);  // [B,Ni] -> [B,sum Ni]
Tensor reshape(const Tensor& x, Shape shape);

// Per-dimension Beta log-density, summed across columns: [B,N] -> [B].
// x must already lie strictly inside (0,1).
Tensor beta_logprob(const Tensor& alpha, const Tensor& beta, const Tensor& x);

// Differential entropy of Beta(alpha, beta) per dim, summed: [B,N] -> [B].
Tensor beta_entropy(const Tensor& alpha, const Tensor& beta);

}  // namespace navlab::nn
