#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "skylens/rng.hpp"

namespace skylens::nn {

// Reverse-mode autodiff over small dense tensors (up to 4 axes, 64-bit
// floats). Nodes carry creation-order ids, so a descending-id sweep is a
// topological order of the DAG.
struct TensorNode {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;  // accumulate into parents' grad

    std::size_t numel() const { return value.size(); }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> n) : node_(std::move(n)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor from(const std::vector<int>& shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->numel(); }
    std::vector<double>& value() { return node_->value; }
    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    // Reverse pass from this scalar node.
    void backward();

    std::shared_ptr<TensorNode> node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// ---- kernels -------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);        // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);        // elementwise
Tensor scale(const Tensor& a, double k);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor matmul(const Tensor& a, const Tensor& b);     // (m,k) x (k,n)
Tensor transpose(const Tensor& a);                   // 2-d
Tensor reshape(const Tensor& a, const std::vector<int>& shape);
Tensor concat_rows(const Tensor& a, const Tensor& b);            // stack along axis 0 (2-d)
Tensor concat_cols(const std::vector<Tensor>& parts);            // along axis 1 (2-d)
Tensor slice_rows(const Tensor& a, int start, int count);        // 2-d view copy

// Row vector bias broadcast over the rows of a (n, d) matrix.
Tensor add_row_bias(const Tensor& a, const Tensor& bias);

// x (n, in) * w (in, out) + bias (out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Normalizes each row of x to zero mean / unit variance, then per-column
// gain and shift.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

Tensor softmax_rows(const Tensor& x);

// Inverted dropout. Training mode draws the keep mask from rng; eval mode is
// the identity.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// input (C_in, H, W), kernel (C_out, C_in, k, k) with odd k, bias (C_out);
// same padding, stride 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

// (C, H, W) -> (C, H/2, W/2), floor division; remembers argmax for the
// backward pass.
Tensor maxpool2x2(const Tensor& input);

// Scaled dot-product multi-head self-attention over x (tokens, d).
// Per-head projections wq/wk/wv are (d, d/heads); wo is (d, d).
Tensor multi_head_self_attention(const Tensor& x, const std::vector<Tensor>& wq,
                                 const std::vector<Tensor>& wk, const std::vector<Tensor>& wv,
                                 const Tensor& wo);

// Mean losses; targets are constants.
Tensor bce_loss(const Tensor& probabilities, const std::vector<double>& targets);
Tensor mse_loss(const Tensor& prediction, const std::vector<double>& targets);
// MSE restricted to the masked positions (weight 1 there, 0 elsewhere).
Tensor masked_mse_loss(const Tensor& prediction, const std::vector<double>& targets,
                       const std::vector<std::uint8_t>& mask);

// ---- optimizer -----------------------------------------------------------

class AdamOptimizer {
public:
    AdamOptimizer(std::vector<Tensor> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad();
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

}  // namespace skylens::nn
