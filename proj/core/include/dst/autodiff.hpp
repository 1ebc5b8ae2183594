#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dst::ad {

/// One recorded operation. Nodes form a DAG through `inputs`; anything a
/// backward rule needs beyond the input/output values is captured in the
/// `backward` closure.
struct Node {
    std::string op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated for requires_grad leaves; lazily for interior nodes
    bool requires_grad = false;
    std::function<void(Node&)> backward;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

/// Value-semantics handle to a tape node. Copies share the node; fresh
/// tensors are created by the factory functions and by every operation.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double fill, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<double> data() { return node_->value; }
    std::span<const double> data() const { return node_->value; }
    std::span<const double> grad() const { return node_->grad; }

    double item() const;

    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
    }

    std::shared_ptr<Node> node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

// ---- primitives -----------------------------------------------------------

/// 2-D matrix product (m x k)(k x n) -> (m x n).
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum. Shapes must match, or the smaller operand's shape must be
/// a suffix of the larger one's, in which case it broadcasts over the leading
/// (batch) axes.
Tensor add(const Tensor& a, const Tensor& b);

/// Elementwise product, same shapes.
Tensor mul(const Tensor& a, const Tensor& b);

/// Multiply by a constant.
Tensor scale(const Tensor& a, double s);

Tensor leaky_relu(const Tensor& x, double slope = 0.2);

/// Concatenate along the last axis; all leading axes must agree.
Tensor concat(const std::vector<Tensor>& xs);

/// Contiguous row slice [begin, end) along the first axis.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

/// Reinterpret shape; element count must be unchanged.
Tensor reshape(const Tensor& x, std::vector<std::size_t> shape);

/// Row-wise softmax over the last axis restricted to positions where
/// mask != 0. Masked positions get probability exactly 0 and pass no
/// gradient. Throws if any row is fully masked.
Tensor masked_softmax(const Tensor& scores, const std::vector<std::uint8_t>& mask);

/// Depthwise causal convolution. x is (channels x length), taps is
/// (channels x k); y[c,t] = sum_i taps[c,i] * x[c, t - i*dilation] with zero
/// left padding, so the output length equals the input length.
Tensor causal_dilated_conv1d(const Tensor& x, const Tensor& taps, std::size_t dilation);

/// Per-channel direct multistep map: w is (D x H x L), x is (D x L),
/// y[d,h] = sum_l w[d,h,l] * x[d,l].
Tensor channel_linear(const Tensor& w, const Tensor& x);

/// Mean squared error over all entries, scalar output.
Tensor mse(const Tensor& pred, const Tensor& target);

/// Mean absolute error over all entries, scalar output (metric; gradient uses
/// sign convention d|x|/dx = sign(x), 0 at 0).
Tensor mae(const Tensor& pred, const Tensor& target);

/// Reverse pass from a scalar loss. Gradients accumulate additively into
/// every reachable requires_grad tensor; call zero_grad between steps.
void backward(const Tensor& loss);

// ---- gradient verification -------------------------------------------------

struct GradCheckIssue {
    std::size_t input_index = 0;
    std::size_t coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradCheckReport {
    bool pass = true;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t excluded = 0;
    std::vector<GradCheckIssue> failures;
};

/// Compares analytic gradients of fn(inputs) against central finite
/// differences, coordinate by coordinate. Relative error uses
/// |a - n| / max(|a|, |n|, 1e-8). Coordinates for which `exclude` returns
/// true (e.g. near activation kinks) are skipped and counted in the report.
GradCheckReport grad_check(
    const std::function<Tensor(std::vector<Tensor>&)>& fn, std::vector<Tensor>& inputs,
    double step = 1e-5, double tolerance = 1e-4,
    const std::function<bool(std::size_t input_index, std::size_t coord)>& exclude = nullptr);

}  // namespace dst::ad
