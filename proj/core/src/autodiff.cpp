#include "dst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace dst::ad {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
}

std::shared_ptr<Node> make_node(std::string op, std::vector<std::shared_ptr<Node>> inputs,
                                std::vector<std::size_t> shape, std::vector<double> value) {
    auto n = std::make_shared<Node>();
    n->op = std::move(op);
    n->inputs = std::move(inputs);
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const auto& in : n->inputs)
        if (in->requires_grad) n->requires_grad = true;
    return n;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double fill, bool requires_grad) {
    std::size_t n = shape_product(shape);
    return from(std::move(shape), std::vector<double>(n, fill), requires_grad);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data,
                    bool requires_grad) {
    if (shape_product(shape) != data.size())
        throw std::invalid_argument("Tensor::from: data size does not match shape");
    auto n = std::make_shared<Node>();
    n->op = "leaf";
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return Tensor(n);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from({1}, {v}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
    return node_->value[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: operands must be rank 2");
    std::size_t m = a.shape()[0], k = a.shape()[1];
    std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) throw std::invalid_argument("matmul: inner dimensions differ");

    std::vector<double> out(m * n, 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t l = 0; l < k; ++l) {
            double av = pa[i * k + l];
            if (av == 0.0) continue;
            const double* brow = pb + l * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }

    auto node = make_node("matmul", {a.node(), b.node()}, {m, n}, std::move(out));
    node->backward = [m, k, n](Node& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        const double* g = self.grad.data();
        if (A.requires_grad) {
            A.ensure_grad();
            // dA = G * B^T
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t l = 0; l < k; ++l) {
                    double s = 0.0;
                    const double* grow = g + i * n;
                    const double* brow = B.value.data() + l * n;
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                    A.grad[i * k + l] += s;
                }
        }
        if (B.requires_grad) {
            B.ensure_grad();
            // dB = A^T * G
            for (std::size_t l = 0; l < k; ++l)
                for (std::size_t i = 0; i < m; ++i) {
                    double av = A.value[i * k + l];
                    if (av == 0.0) continue;
                    const double* grow = g + i * n;
                    double* brow = B.grad.data() + l * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    };
    return Tensor(node);
}

namespace {

bool is_suffix(const std::vector<std::size_t>& small, const std::vector<std::size_t>& big) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    const Tensor* big = &a;
    const Tensor* small = &b;
    if (a.size() < b.size()) std::swap(big, small);
    if (big->shape() != small->shape() && !is_suffix(small->shape(), big->shape()))
        throw std::invalid_argument("add: shapes incompatible for batch broadcast");

    std::size_t nb = big->size(), ns = small->size();
    std::vector<double> out(nb);
    const double* pb = big->data().data();
    const double* ps = small->data().data();
    for (std::size_t i = 0; i < nb; ++i) out[i] = pb[i] + ps[i % ns];

    bool small_is_a = (small == &a);
    auto node = make_node("add", {a.node(), b.node()}, big->shape(), std::move(out));
    node->backward = [ns, small_is_a](Node& self) {
        Node& A = *self.inputs[small_is_a ? 1 : 0];  // the large operand
        Node& B = *self.inputs[small_is_a ? 0 : 1];  // the (possibly) broadcast operand
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += self.grad[i];
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) B.grad[i % ns] += self.grad[i];
        }
    };
    return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
    auto node = make_node("mul", {a.node(), b.node()}, a.shape(), std::move(out));
    node->backward = [](Node& self) {
        Node& A = *self.inputs[0];
        Node& B = *self.inputs[1];
        if (A.requires_grad) {
            A.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                A.grad[i] += self.grad[i] * B.value[i];
        }
        if (B.requires_grad) {
            B.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                B.grad[i] += self.grad[i] * A.value[i];
        }
    };
    return Tensor(node);
}

Tensor scale(const Tensor& a, double s) {
    std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = s * a.data()[i];
    auto node = make_node("scale", {a.node()}, a.shape(), std::move(out));
    node->backward = [s](Node& self) {
        Node& A = *self.inputs[0];
        if (!A.requires_grad) return;
        A.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) A.grad[i] += s * self.grad[i];
    };
    return Tensor(node);
}

Tensor leaky_relu(const Tensor& x, double slope) {
    std::size_t n = x.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = x.data()[i];
        out[i] = v >= 0.0 ? v : slope * v;
    }
    auto node = make_node("leaky_relu", {x.node()}, x.shape(), std::move(out));
    node->backward = [slope](Node& self) {
        Node& X = *self.inputs[0];
        if (!X.requires_grad) return;
        X.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            X.grad[i] += self.grad[i] * (X.value[i] >= 0.0 ? 1.0 : slope);
    };
    return Tensor(node);
}

Tensor concat(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: no inputs");
    auto lead = xs[0].shape();
    lead.pop_back();
    std::size_t rows = shape_product(lead);
    std::size_t total_last = 0;
    for (const auto& x : xs) {
        if (x.rank() != xs[0].rank())
            throw std::invalid_argument("concat: rank mismatch");
        auto l = x.shape();
        l.pop_back();
        if (l != lead) throw std::invalid_argument("concat: leading dimensions differ");
        total_last += x.shape().back();
    }

    std::vector<double> out(rows * total_last);
    std::vector<std::size_t> widths(xs.size());
    std::vector<std::shared_ptr<Node>> inputs;
    inputs.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        widths[i] = xs[i].shape().back();
        inputs.push_back(xs[i].node());
    }
    for (std::size_t r = 0; r < rows; ++r) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double* src = xs[i].data().data() + r * widths[i];
            std::copy(src, src + widths[i], out.data() + r * total_last + off);
            off += widths[i];
        }
    }

    auto shape = lead;
    shape.push_back(total_last);
    auto node = make_node("concat", std::move(inputs), std::move(shape), std::move(out));
    node->backward = [rows, total_last, widths](Node& self) {
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t off = 0;
            for (std::size_t i = 0; i < self.inputs.size(); ++i) {
                Node& X = *self.inputs[i];
                if (X.requires_grad) {
                    X.ensure_grad();
                    for (std::size_t j = 0; j < widths[i]; ++j)
                        X.grad[r * widths[i] + j] += self.grad[r * total_last + off + j];
                }
                off += widths[i];
            }
        }
    };
    return Tensor(node);
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() < 1) throw std::invalid_argument("slice_rows: rank 0 input");
    std::size_t rows = x.shape()[0];
    if (begin > end || end > rows) throw std::invalid_argument("slice_rows: range out of bounds");
    std::size_t row_size = x.size() / std::max<std::size_t>(rows, 1);
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * row_size),
                            x.data().begin() + static_cast<std::ptrdiff_t>(end * row_size));
    auto shape = x.shape();
    shape[0] = end - begin;
    auto node = make_node("slice", {x.node()}, std::move(shape), std::move(out));
    node->backward = [begin, row_size](Node& self) {
        Node& X = *self.inputs[0];
        if (!X.requires_grad) return;
        X.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            X.grad[begin * row_size + i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_product(shape) != x.size())
        throw std::invalid_argument("reshape: element count changed");
    auto node = make_node("reshape", {x.node()}, std::move(shape),
                          std::vector<double>(x.data().begin(), x.data().end()));
    node->backward = [](Node& self) {
        Node& X = *self.inputs[0];
        if (!X.requires_grad) return;
        X.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) X.grad[i] += self.grad[i];
    };
    return Tensor(node);
}

Tensor masked_softmax(const Tensor& scores, const std::vector<std::uint8_t>& mask) {
    if (mask.size() != scores.size())
        throw std::invalid_argument("masked_softmax: mask size mismatch");
    std::size_t cols = scores.shape().back();
    std::size_t rows = scores.size() / cols;

    std::vector<double> out(scores.size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* s = scores.data().data() + r * cols;
        const std::uint8_t* m = mask.data() + r * cols;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cols; ++c)
            if (m[c]) mx = std::max(mx, s[c]);
        if (!std::isfinite(mx))
            throw std::invalid_argument("masked_softmax: row has no valid positions");
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c)
            if (m[c]) denom += std::exp(s[c] - mx);
        for (std::size_t c = 0; c < cols; ++c)
            if (m[c]) out[r * cols + c] = std::exp(s[c] - mx) / denom;
    }

    auto node = make_node("masked_softmax", {scores.node()}, scores.shape(), std::move(out));
    node->backward = [rows, cols, mask](Node& self) {
        Node& S = *self.inputs[0];
        if (!S.requires_grad) return;
        S.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const double* y = self.value.data() + r * cols;
            const double* g = self.grad.data() + r * cols;
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c)
                if (mask[r * cols + c]) dot += g[c] * y[c];
            for (std::size_t c = 0; c < cols; ++c)
                if (mask[r * cols + c]) S.grad[r * cols + c] += y[c] * (g[c] - dot);
        }
    };
    return Tensor(node);
}

Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& taps, std::size_t dilation) {
    if (x.rank() != 2 || taps.rank() != 2)
        throw std::invalid_argument("causal_dilated_conv1d: operands must be rank 2");
    if (dilation < 1) throw std::invalid_argument("causal_dilated_conv1d: dilation must be >= 1");
    std::size_t channels = x.shape()[0], length = x.shape()[1];
    if (taps.shape()[0] != channels)
        throw std::invalid_argument("causal_dilated_conv1d: channel count mismatch");
    std::size_t k = taps.shape()[1];

    std::vector<double> out(channels * length, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
        const double* xc = x.data().data() + c * length;
        const double* w = taps.data().data() + c * k;
        double* yc = out.data() + c * length;
        for (std::size_t t = 0; t < length; ++t) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                std::size_t back = i * dilation;
                if (back > t) break;  // zero left padding
                s += w[i] * xc[t - back];
            }
            yc[t] = s;
        }
    }

    auto node = make_node("causal_dilated_conv1d", {x.node(), taps.node()},
                          {channels, length}, std::move(out));
    node->backward = [channels, length, k, dilation](Node& self) {
        Node& X = *self.inputs[0];
        Node& W = *self.inputs[1];
        if (X.requires_grad) X.ensure_grad();
        if (W.requires_grad) W.ensure_grad();
        for (std::size_t c = 0; c < channels; ++c) {
            const double* g = self.grad.data() + c * length;
            const double* xc = X.value.data() + c * length;
            const double* w = W.value.data() + c * k;
            for (std::size_t t = 0; t < length; ++t) {
                for (std::size_t i = 0; i < k; ++i) {
                    std::size_t back = i * dilation;
                    if (back > t) break;
                    if (W.requires_grad) W.grad[c * k + i] += g[t] * xc[t - back];
                    if (X.requires_grad) X.grad[c * length + t - back] += g[t] * w[i];
                }
            }
        }
    };
    return Tensor(node);
}

Tensor channel_linear(const Tensor& w, const Tensor& x) {
    if (w.rank() != 3 || x.rank() != 2)
        throw std::invalid_argument("channel_linear: w must be rank 3 and x rank 2");
    std::size_t d = w.shape()[0], h = w.shape()[1], l = w.shape()[2];
    if (x.shape()[0] != d || x.shape()[1] != l)
        throw std::invalid_argument("channel_linear: x shape does not match w");

    std::vector<double> out(d * h, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        const double* xc = x.data().data() + c * l;
        for (std::size_t j = 0; j < h; ++j) {
            const double* wrow = w.data().data() + (c * h + j) * l;
            double s = 0.0;
            for (std::size_t i = 0; i < l; ++i) s += wrow[i] * xc[i];
            out[c * h + j] = s;
        }
    }

    auto node = make_node("channel_linear", {w.node(), x.node()}, {d, h}, std::move(out));
    node->backward = [d, h, l](Node& self) {
        Node& W = *self.inputs[0];
        Node& X = *self.inputs[1];
        if (W.requires_grad) W.ensure_grad();
        if (X.requires_grad) X.ensure_grad();
        for (std::size_t c = 0; c < d; ++c) {
            const double* xc = X.value.data() + c * l;
            for (std::size_t j = 0; j < h; ++j) {
                double g = self.grad[c * h + j];
                if (g == 0.0) continue;
                const double* wrow = W.value.data() + (c * h + j) * l;
                if (W.requires_grad) {
                    double* wg = W.grad.data() + (c * h + j) * l;
                    for (std::size_t i = 0; i < l; ++i) wg[i] += g * xc[i];
                }
                if (X.requires_grad) {
                    double* xg = X.grad.data() + c * l;
                    for (std::size_t i = 0; i < l; ++i) xg[i] += g * wrow[i];
                }
            }
        }
    };
    return Tensor(node);
}

namespace {

Tensor reduction_error(const Tensor& pred, const Tensor& target, bool squared) {
    check_same_shape(pred, target, squared ? "mse" : "mae");
    std::size_t n = pred.size();
    if (n == 0) throw std::invalid_argument("mse/mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = pred.data()[i] - target.data()[i];
        acc += squared ? d * d : std::abs(d);
    }
    auto node = make_node(squared ? "mse" : "mae", {pred.node(), target.node()}, {1},
                          {acc / static_cast<double>(n)});
    node->backward = [n, squared](Node& self) {
        Node& P = *self.inputs[0];
        Node& T = *self.inputs[1];
        double g = self.grad[0] / static_cast<double>(n);
        if (P.requires_grad) P.ensure_grad();
        if (T.requires_grad) T.ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            double d = P.value[i] - T.value[i];
            double dd = squared ? 2.0 * d : (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            if (P.requires_grad) P.grad[i] += g * dd;
            if (T.requires_grad) T.grad[i] -= g * dd;
        }
    };
    return Tensor(node);
}

}  // namespace

Tensor mse(const Tensor& pred, const Tensor& target) { return reduction_error(pred, target, true); }
Tensor mae(const Tensor& pred, const Tensor& target) { return reduction_error(pred, target, false); }

void backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad()) return;  // nothing reachable requires gradients

    // Postorder DFS from the loss gives a topological order of the subgraph
    // that requires gradients; process it in reverse.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, std::size_t>> stack;
    std::unordered_set<Node*> visited;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->inputs.size()) {
            Node* next = node->inputs[idx].get();
            ++idx;
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior accumulators are scratch space for this pass; only leaf
    // gradients survive across calls (repeated backward adds up).
    for (Node* n : order) {
        if (!n->inputs.empty()) {
            n->ensure_grad();
            std::fill(n->grad.begin(), n->grad.end(), 0.0);
        }
    }

    Node* root = loss.node().get();
    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward) n->backward(*n);
    }
}

GradCheckReport grad_check(
    const std::function<Tensor(std::vector<Tensor>&)>& fn, std::vector<Tensor>& inputs,
    double step, double tolerance,
    const std::function<bool(std::size_t, std::size_t)>& exclude) {
    GradCheckReport report;

    for (auto& input : inputs) input.zero_grad();
    Tensor loss = fn(inputs);
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& input : inputs)
        analytic.emplace_back(input.grad().begin(), input.grad().end());

    for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
        if (!inputs[ii].requires_grad()) continue;
        auto values = inputs[ii].data();
        for (std::size_t c = 0; c < values.size(); ++c) {
            if (exclude && exclude(ii, c)) {
                ++report.excluded;
                continue;
            }
            double keep = values[c];
            values[c] = keep + step;
            double up = fn(inputs).item();
            values[c] = keep - step;
            double down = fn(inputs).item();
            values[c] = keep;

            double numeric = (up - down) / (2.0 * step);
            double a = analytic[ii][c];
            double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            double rel = std::abs(a - numeric) / denom;
            ++report.checked;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            if (rel > tolerance) {
                report.pass = false;
                if (report.failures.size() < 16)
                    report.failures.push_back({ii, c, a, numeric, rel});
            }
        }
    }
    return report;
}

}  // namespace dst::ad
