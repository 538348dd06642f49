#include "skylens/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace skylens::nn {

namespace {

std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (const int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(d);
    }
    if (shape.size() > 4) throw std::invalid_argument("tensors support up to 4 axes");
    return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> value) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->grad.assign(n->value.size(), 0.0);
    n->id = next_id();
    return n;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a) {
    std::string s = op + ": bad shape (";
    for (std::size_t i = 0; i < a.shape().size(); ++i)
        s += (i ? "," : "") + std::to_string(a.shape()[i]);
    throw std::invalid_argument(s + ")");
}

void require_same_shape(const std::string& op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        std::string s = op + ": shape mismatch (";
        for (const int d : a.shape()) s += std::to_string(d) + " ";
        s += ") vs (";
        for (const int d : b.shape()) s += std::to_string(d) + " ";
        throw std::invalid_argument(s + ")");
    }
}

}  // namespace

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    auto n = make_node(shape, std::vector<double>(shape_numel(shape), 0.0));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::from(const std::vector<int>& shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw std::invalid_argument("tensor data does not match shape");
    auto n = make_node(shape, std::move(data));
    n->requires_grad = requires_grad;
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

void Tensor::backward() {
    if (!node_) throw std::invalid_argument("backward on an undefined tensor");
    if (node_->numel() != 1) throw std::invalid_argument("backward requires a scalar loss");

    // Reachable subgraph, then descending creation ids = topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<TensorNode*> stack{node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        TensorNode* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TensorNode* a, const TensorNode* b) { return a->id > b->id; });

    node_->grad[0] += 1.0;
    for (TensorNode* n : order)
        if (n->backprop) n->backprop(*n);
}

namespace {

using Fn = std::function<void(TensorNode&)>;

Tensor unary_op(const Tensor& a, std::vector<double> value, Fn backprop) {
    auto n = make_node(a.shape(), std::move(value));
    n->parents = {a.node()};
    n->backprop = std::move(backprop);
    return Tensor(n);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] + b.value()[i];
    auto n = make_node(a.shape(), std::move(v));
    n->parents = {a.node(), b.node()};
    n->backprop = [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i];
            self.parents[1]->grad[i] += self.grad[i];
        }
    };
    return Tensor(n);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] - b.value()[i];
    auto n = make_node(a.shape(), std::move(v));
    n->parents = {a.node(), b.node()};
    n->backprop = [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i];
            self.parents[1]->grad[i] -= self.grad[i];
        }
    };
    return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * b.value()[i];
    auto n = make_node(a.shape(), std::move(v));
    n->parents = {a.node(), b.node()};
    n->backprop = [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            self.parents[0]->grad[i] += self.grad[i] * self.parents[1]->value[i];
            self.parents[1]->grad[i] += self.grad[i] * self.parents[0]->value[i];
        }
    };
    return Tensor(n);
}

Tensor scale(const Tensor& a, double k) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] * k;
    return unary_op(a, std::move(v), [k](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            self.parents[0]->grad[i] += self.grad[i] * k;
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.value()[i] > 0.0 ? a.value()[i] : 0.0;
    return unary_op(a, std::move(v), [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (self.parents[0]->value[i] > 0.0) self.parents[0]->grad[i] += self.grad[i];
    });
}

Tensor sigmoid(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-a.value()[i]));
    return unary_op(a, std::move(v), [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double s = self.value[i];
            self.parents[0]->grad[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul: incompatible shapes (" +
                                    std::to_string(a.shape()[0]) + "x" +
                                    std::to_string(a.shape().size() > 1 ? a.shape()[1] : 0) +
                                    ") x (" + std::to_string(b.shape()[0]) + "x" +
                                    std::to_string(b.shape().size() > 1 ? b.shape()[1] : 0) + ")");
    const int m = a.shape()[0], k = a.shape()[1], n2 = b.shape()[1];
    std::vector<double> v(static_cast<std::size_t>(m) * n2, 0.0);
    const auto& av = a.value();
    const auto& bv = b.value();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const std::size_t brow = static_cast<std::size_t>(p) * n2;
            const std::size_t vrow = static_cast<std::size_t>(i) * n2;
            for (int j = 0; j < n2; ++j) v[vrow + j] += aip * bv[brow + j];
        }
    auto node = make_node({m, n2}, std::move(v));
    node->parents = {a.node(), b.node()};
    node->backprop = [m, k, n2](TensorNode& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        // dA = dC * B^T ; dB = A^T * dC
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                const std::size_t crow = static_cast<std::size_t>(i) * n2;
                const std::size_t brow = static_cast<std::size_t>(p) * n2;
                for (int j = 0; j < n2; ++j) acc += self.grad[crow + j] * bv[brow + j];
                ga[static_cast<std::size_t>(i) * k + p] += acc;
            }
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n2; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i)
                    acc += av[static_cast<std::size_t>(i) * k + p] *
                           self.grad[static_cast<std::size_t>(i) * n2 + j];
                gb[static_cast<std::size_t>(p) * n2 + j] += acc;
            }
    };
    return Tensor(node);
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) shape_error("transpose", a);
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(a.numel());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            v[static_cast<std::size_t>(j) * m + i] = a.value()[static_cast<std::size_t>(i) * n + j];
    auto node = make_node({n, m}, std::move(v));
    node->parents = {a.node()};
    node->backprop = [m, n](TensorNode& self) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                self.parents[0]->grad[static_cast<std::size_t>(i) * n + j] +=
                    self.grad[static_cast<std::size_t>(j) * m + i];
    };
    return Tensor(node);
}

Tensor reshape(const Tensor& a, const std::vector<int>& shape) {
    if (shape_numel(shape) != a.numel()) throw std::invalid_argument("reshape: element count changed");
    auto node = make_node(shape, a.value());
    node->parents = {a.node()};
    node->backprop = [](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            self.parents[0]->grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw std::invalid_argument("concat_rows: column counts differ");
    const int ra = a.shape()[0], rb = b.shape()[0], c = a.shape()[1];
    std::vector<double> v;
    v.reserve(a.numel() + b.numel());
    v.insert(v.end(), a.value().begin(), a.value().end());
    v.insert(v.end(), b.value().begin(), b.value().end());
    auto node = make_node({ra + rb, c}, std::move(v));
    node->parents = {a.node(), b.node()};
    node->backprop = [ra, rb, c](TensorNode& self) {
        const std::size_t na = static_cast<std::size_t>(ra) * c;
        for (std::size_t i = 0; i < na; ++i) self.parents[0]->grad[i] += self.grad[i];
        const std::size_t nb = static_cast<std::size_t>(rb) * c;
        for (std::size_t i = 0; i < nb; ++i) self.parents[1]->grad[i] += self.grad[na + i];
    };
    return Tensor(node);
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty input");
    const int rows = parts[0].shape()[0];
    int cols = 0;
    for (const auto& p : parts) {
        if (p.shape().size() != 2 || p.shape()[0] != rows)
            throw std::invalid_argument("concat_cols: row counts differ");
        cols += p.shape()[1];
    }
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    int offset = 0;
    for (const auto& p : parts) {
        const int pc = p.shape()[1];
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pc; ++c)
                v[static_cast<std::size_t>(r) * cols + offset + c] =
                    p.value()[static_cast<std::size_t>(r) * pc + c];
        offset += pc;
    }
    auto node = make_node({rows, cols}, std::move(v));
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backprop = [rows, cols](TensorNode& self) {
        int offset2 = 0;
        for (auto& parent : self.parents) {
            const int pc = parent->shape[1];
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < pc; ++c)
                    parent->grad[static_cast<std::size_t>(r) * pc + c] +=
                        self.grad[static_cast<std::size_t>(r) * cols + offset2 + c];
            offset2 += pc;
        }
    };
    return Tensor(node);
}

Tensor slice_rows(const Tensor& a, int start, int count) {
    if (a.shape().size() != 2) shape_error("slice_rows", a);
    const int rows = a.shape()[0], cols = a.shape()[1];
    if (start < 0 || count <= 0 || start + count > rows)
        throw std::invalid_argument("slice_rows: range out of bounds");
    std::vector<double> v(static_cast<std::size_t>(count) * cols);
    std::copy(a.value().begin() + static_cast<std::ptrdiff_t>(start) * cols,
              a.value().begin() + static_cast<std::ptrdiff_t>(start + count) * cols, v.begin());
    auto node = make_node({count, cols}, std::move(v));
    node->parents = {a.node()};
    node->backprop = [start, cols](TensorNode& self) {
        const std::size_t base = static_cast<std::size_t>(start) * cols;
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            self.parents[0]->grad[base + i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor add_row_bias(const Tensor& a, const Tensor& bias) {
    if (a.shape().size() != 2 || bias.shape().size() != 1 || bias.shape()[0] != a.shape()[1])
        throw std::invalid_argument("add_row_bias: bias must match the column count");
    const int rows = a.shape()[0], cols = a.shape()[1];
    std::vector<double> v(a.numel());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            v[static_cast<std::size_t>(r) * cols + c] =
                a.value()[static_cast<std::size_t>(r) * cols + c] + bias.value()[static_cast<std::size_t>(c)];
    auto node = make_node(a.shape(), std::move(v));
    node->parents = {a.node(), bias.node()};
    node->backprop = [rows, cols](TensorNode& self) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const double g = self.grad[static_cast<std::size_t>(r) * cols + c];
                self.parents[0]->grad[static_cast<std::size_t>(r) * cols + c] += g;
                self.parents[1]->grad[static_cast<std::size_t>(c)] += g;
            }
    };
    return Tensor(node);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    return add_row_bias(matmul(x, w), bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
    if (x.shape().size() != 2) shape_error("layer_norm", x);
    const int rows = x.shape()[0], cols = x.shape()[1];
    if (gain.shape() != std::vector<int>{cols} || shift.shape() != std::vector<int>{cols})
        throw std::invalid_argument("layer_norm: gain/shift must match the column count");

    std::vector<double> v(x.numel());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> normalized(x.numel());
    for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        double mean = 0.0;
        for (int c = 0; c < cols; ++c) mean += x.value()[base + c];
        mean /= cols;
        double var = 0.0;
        for (int c = 0; c < cols; ++c) {
            const double d = x.value()[base + c] - mean;
            var += d * d;
        }
        var /= cols;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (int c = 0; c < cols; ++c) {
            const double n = (x.value()[base + c] - mean) * is;
            normalized[base + c] = n;
            v[base + c] = n * gain.value()[static_cast<std::size_t>(c)] +
                          shift.value()[static_cast<std::size_t>(c)];
        }
    }
    auto node = make_node(x.shape(), std::move(v));
    node->parents = {x.node(), gain.node(), shift.node()};
    node->backprop = [rows, cols, inv_std, normalized](TensorNode& self) {
        auto& gx = self.parents[0]->grad;
        auto& gg = self.parents[1]->grad;
        auto& gs = self.parents[2]->grad;
        const auto& gain_v = self.parents[1]->value;
        for (int r = 0; r < rows; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * cols;
            double mean_dn = 0.0, mean_dn_n = 0.0;
            for (int c = 0; c < cols; ++c) {
                const double dy = self.grad[base + c];
                const double dn = dy * gain_v[static_cast<std::size_t>(c)];
                mean_dn += dn;
                mean_dn_n += dn * normalized[base + c];
                gg[static_cast<std::size_t>(c)] += dy * normalized[base + c];
                gs[static_cast<std::size_t>(c)] += dy;
            }
            mean_dn /= cols;
            mean_dn_n /= cols;
            const double is = inv_std[static_cast<std::size_t>(r)];
            for (int c = 0; c < cols; ++c) {
                const double dn = self.grad[base + c] * gain_v[static_cast<std::size_t>(c)];
                gx[base + c] += is * (dn - mean_dn - normalized[base + c] * mean_dn_n);
            }
        }
    };
    return Tensor(node);
}

Tensor softmax_rows(const Tensor& x) {
    if (x.shape().size() != 2) shape_error("softmax_rows", x);
    const int rows = x.shape()[0], cols = x.shape()[1];
    std::vector<double> v(x.numel());
    for (int r = 0; r < rows; ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * cols;
        double mx = x.value()[base];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, x.value()[base + c]);
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            v[base + c] = std::exp(x.value()[base + c] - mx);
            sum += v[base + c];
        }
        for (int c = 0; c < cols; ++c) v[base + c] /= sum;
    }
    auto node = make_node(x.shape(), std::move(v));
    node->parents = {x.node()};
    node->backprop = [rows, cols](TensorNode& self) {
        for (int r = 0; r < rows; ++r) {
            const std::size_t base = static_cast<std::size_t>(r) * cols;
            double dot = 0.0;
            for (int c = 0; c < cols; ++c) dot += self.grad[base + c] * self.value[base + c];
            for (int c = 0; c < cols; ++c)
                self.parents[0]->grad[base + c] +=
                    self.value[base + c] * (self.grad[base + c] - dot);
        }
    };
    return Tensor(node);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) {
        // Identity pass-through that still participates in the graph.
        return scale(x, 1.0);
    }
    const double keep = 1.0 - rate;
    std::vector<double> mask(x.numel());
    for (auto& m : mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
    std::vector<double> v(x.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = x.value()[i] * mask[i];
    auto node = make_node(x.shape(), std::move(v));
    node->parents = {x.node()};
    node->backprop = [mask](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            self.parents[0]->grad[i] += self.grad[i] * mask[i];
    };
    return Tensor(node);
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
    if (input.shape().size() != 3 || kernel.shape().size() != 4)
        throw std::invalid_argument("conv2d: input must be (C,H,W), kernel (Cout,Cin,k,k)");
    const int ci = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const int co = kernel.shape()[0], kci = kernel.shape()[1], kh = kernel.shape()[2],
              kw = kernel.shape()[3];
    if (kci != ci || kh != kw || kh % 2 == 0)
        throw std::invalid_argument("conv2d: kernel must be (Cout," + std::to_string(ci) +
                                    ",k,k) with odd k; got Cin " + std::to_string(kci));
    if (bias.shape() != std::vector<int>{co})
        throw std::invalid_argument("conv2d: bias must have one entry per output channel");
    const int pad = kh / 2;

    std::vector<double> v(static_cast<std::size_t>(co) * h * w, 0.0);
    const auto& in = input.value();
    const auto& kv = kernel.value();
    for (int oc = 0; oc < co; ++oc) {
        const std::size_t obase = static_cast<std::size_t>(oc) * h * w;
        for (int ic = 0; ic < ci; ++ic) {
            const std::size_t ibase = static_cast<std::size_t>(ic) * h * w;
            const std::size_t kbase = (static_cast<std::size_t>(oc) * ci + ic) * kh * kw;
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    double acc = 0.0;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int sx = x + kx - pad;
                            if (sx < 0 || sx >= w) continue;
                            acc += in[ibase + static_cast<std::size_t>(sy) * w + sx] *
                                   kv[kbase + static_cast<std::size_t>(ky) * kw + kx];
                        }
                    }
                    v[obase + static_cast<std::size_t>(y) * w + x] += acc;
                }
            }
        }
        const double b = bias.value()[static_cast<std::size_t>(oc)];
        for (int i = 0; i < h * w; ++i) v[obase + static_cast<std::size_t>(i)] += b;
    }
    auto node = make_node({co, h, w}, std::move(v));
    node->parents = {input.node(), kernel.node(), bias.node()};
    node->backprop = [ci, co, h, w, kh, kw, pad](TensorNode& self) {
        auto& gin = self.parents[0]->grad;
        auto& gk = self.parents[1]->grad;
        auto& gb = self.parents[2]->grad;
        const auto& in = self.parents[0]->value;
        const auto& kv = self.parents[1]->value;
        for (int oc = 0; oc < co; ++oc) {
            const std::size_t obase = static_cast<std::size_t>(oc) * h * w;
            double bacc = 0.0;
            for (int i = 0; i < h * w; ++i) bacc += self.grad[obase + static_cast<std::size_t>(i)];
            gb[static_cast<std::size_t>(oc)] += bacc;
            for (int ic = 0; ic < ci; ++ic) {
                const std::size_t ibase = static_cast<std::size_t>(ic) * h * w;
                const std::size_t kbase = (static_cast<std::size_t>(oc) * ci + ic) * kh * kw;
                for (int y = 0; y < h; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const double g = self.grad[obase + static_cast<std::size_t>(y) * w + x];
                        if (g == 0.0) continue;
                        for (int ky = 0; ky < kh; ++ky) {
                            const int sy = y + ky - pad;
                            if (sy < 0 || sy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int sx = x + kx - pad;
                                if (sx < 0 || sx >= w) continue;
                                const std::size_t ii = ibase + static_cast<std::size_t>(sy) * w + sx;
                                const std::size_t kk = kbase + static_cast<std::size_t>(ky) * kw + kx;
                                gin[ii] += g * kv[kk];
                                gk[kk] += g * in[ii];
                            }
                        }
                    }
                }
            }
        }
    };
    return Tensor(node);
}

Tensor maxpool2x2(const Tensor& input) {
    if (input.shape().size() != 3) shape_error("maxpool2x2", input);
    const int c = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const int oh = h / 2, ow = w / 2;
    if (oh == 0 || ow == 0) throw std::invalid_argument("maxpool2x2: input too small");
    std::vector<double> v(static_cast<std::size_t>(c) * oh * ow);
    std::vector<std::uint32_t> argmax(v.size());
    for (int ch = 0; ch < c; ++ch) {
        const std::size_t ibase = static_cast<std::size_t>(ch) * h * w;
        const std::size_t obase = static_cast<std::size_t>(ch) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double best = -1e300;
                std::uint32_t bi = 0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::size_t ii =
                            ibase + static_cast<std::size_t>(2 * y + dy) * w + (2 * x + dx);
                        if (input.value()[ii] > best) {
                            best = input.value()[ii];
                            bi = static_cast<std::uint32_t>(ii);
                        }
                    }
                v[obase + static_cast<std::size_t>(y) * ow + x] = best;
                argmax[obase + static_cast<std::size_t>(y) * ow + x] = bi;
            }
        }
    }
    auto node = make_node({c, oh, ow}, std::move(v));
    node->parents = {input.node()};
    node->backprop = [argmax](TensorNode& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            self.parents[0]->grad[argmax[i]] += self.grad[i];
    };
    return Tensor(node);
}

Tensor multi_head_self_attention(const Tensor& x, const std::vector<Tensor>& wq,
                                 const std::vector<Tensor>& wk, const std::vector<Tensor>& wv,
                                 const Tensor& wo) {
    if (wq.empty() || wq.size() != wk.size() || wq.size() != wv.size())
        throw std::invalid_argument("attention: per-head projection lists must match");
    const int d = x.shape()[1];
    const int head_dim = wq[0].shape()[1];
    if (static_cast<int>(wq.size()) * head_dim != d)
        throw std::invalid_argument("attention: model width must equal heads * head_dim");
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

    std::vector<Tensor> heads;
    heads.reserve(wq.size());
    for (std::size_t h = 0; h < wq.size(); ++h) {
        const Tensor q = matmul(x, wq[h]);
        const Tensor k = matmul(x, wk[h]);
        const Tensor v = matmul(x, wv[h]);
        const Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt);
        const Tensor attn = softmax_rows(scores);
        heads.push_back(matmul(attn, v));
    }
    return matmul(concat_cols(heads), wo);
}

Tensor bce_loss(const Tensor& probabilities, const std::vector<double>& targets) {
    if (probabilities.numel() != targets.size())
        throw std::invalid_argument("bce_loss: prediction/target size mismatch");
    constexpr double kEps = 1e-12;
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    double loss = 0.0;
    std::vector<double> clamped(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double p = std::clamp(probabilities.value()[i], kEps, 1.0 - kEps);
        clamped[i] = p;
        loss -= (targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p)) * inv_n;
    }
    auto node = make_node({1}, {loss});
    node->parents = {probabilities.node()};
    node->backprop = [targets, clamped, inv_n](TensorNode& self) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const double p = clamped[i];
            self.parents[0]->grad[i] +=
                self.grad[0] * inv_n * (p - targets[i]) / (p * (1.0 - p));
        }
    };
    return Tensor(node);
}

Tensor mse_loss(const Tensor& prediction, const std::vector<double>& targets) {
    if (prediction.numel() != targets.size())
        throw std::invalid_argument("mse_loss: prediction/target size mismatch");
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double d = prediction.value()[i] - targets[i];
        loss += d * d * inv_n;
    }
    auto node = make_node({1}, {loss});
    node->parents = {prediction.node()};
    node->backprop = [targets, inv_n](TensorNode& self) {
        for (std::size_t i = 0; i < targets.size(); ++i)
            self.parents[0]->grad[i] +=
                self.grad[0] * 2.0 * inv_n * (self.parents[0]->value[i] - targets[i]);
    };
    return Tensor(node);
}

Tensor masked_mse_loss(const Tensor& prediction, const std::vector<double>& targets,
                       const std::vector<std::uint8_t>& mask) {
    if (prediction.numel() != targets.size() || targets.size() != mask.size())
        throw std::invalid_argument("masked_mse_loss: size mismatch");
    long active = 0;
    for (const auto m : mask) active += m ? 1 : 0;
    if (active == 0) throw std::invalid_argument("masked_mse_loss: empty mask");
    const double inv_n = 1.0 / static_cast<double>(active);
    double loss = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!mask[i]) continue;
        const double d = prediction.value()[i] - targets[i];
        loss += d * d * inv_n;
    }
    auto node = make_node({1}, {loss});
    node->parents = {prediction.node()};
    node->backprop = [targets, mask, inv_n](TensorNode& self) {
        for (std::size_t i = 0; i < targets.size(); ++i) {
            if (!mask[i]) continue;
            self.parents[0]->grad[i] +=
                self.grad[0] * 2.0 * inv_n * (self.parents[0]->value[i] - targets[i]);
        }
    };
    return Tensor(node);
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& value = params_[pi].value();
        const auto& grad = params_[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
            const double mh = m[i] / bc1;
            const double vh = v[i] / bc2;
            value[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

}  // namespace skylens::nn
