#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "newscred/rng.hpp"

namespace newscred {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

class Tape;

// Dense 64-bit float tensor, row-major. Values are immutable once
// constructed; copies share storage. A tensor may additionally be a node on a
// Tape (node() >= 0), in which case gradients can be read back after
// Tape::backward.
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape);
    static Tensor vec(std::vector<double> values);
    static Tensor scalar(double v);
    static Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

    const Shape& shape() const { return shape_; }
    std::size_t numel() const;
    std::size_t rows() const;  // matrices only
    std::size_t cols() const;  // matrices only

    const std::vector<double>& values() const { return *data_; }
    double at(std::size_t i) const { return (*data_)[i]; }
    // Value of a single-element tensor.
    double item() const;

    bool tracked() const { return node_ >= 0; }
    int node() const { return node_; }
    const Tape* owner() const { return owner_; }

private:
    friend class Tape;
    std::shared_ptr<const std::vector<double>> data_;
    Shape shape_;
    int node_ = -1;
    const Tape* owner_ = nullptr;
};

// Records the forward graph so gradients of one scalar output can be pulled
// back to every tracked input. Nodes are appended in evaluation order, which
// is already a topological order; backward walks it in reverse and sums
// contributions over fan-out. Single-threaded.
class Tape {
public:
    using Pull = std::function<void(Tape&, const std::vector<double>&)>;

    // Registers a plain tensor as a leaf node (e.g. a trainable parameter).
    Tensor track(const Tensor& value);

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients for every node.
    // loss must be a single-element tensor recorded on this tape.
    void backward(const Tensor& loss);

    // Gradient of the last backward() w.r.t. a tracked tensor. Nodes the loss
    // never touched report zero.
    Tensor grad(const Tensor& t) const;

    std::size_t node_count() const { return nodes_.size(); }

    // Implementation interface for op kernels.
    int push(std::size_t numel, Pull pull);
    std::vector<double>& grad_of(int node) { return nodes_[static_cast<std::size_t>(node)].grad; }
    Tensor adopt(Shape shape, std::vector<double> values, int node);

private:
    struct Node {
        std::size_t numel = 0;
        Pull pull;  // empty for leaves
        std::vector<double> grad;
    };
    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

// Op kernels. `tape` may be null: the op then computes plain values and the
// result is untracked. With a tape, the result is tracked iff at least one
// input is tracked. Shape violations raise DimensionError naming both shapes.
Tensor affine(Tape* tape, const Tensor& w, const Tensor& x, const Tensor& b);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor hadamard(Tape* tape, const Tensor& a, const Tensor& b);
Tensor sigmoid(Tape* tape, const Tensor& x);
Tensor tanh_op(Tape* tape, const Tensor& x);
Tensor one_minus(Tape* tape, const Tensor& x);
Tensor scale(Tape* tape, double c, const Tensor& x);
Tensor concat(Tape* tape, const std::vector<Tensor>& parts);
Tensor sum_of(Tape* tape, const std::vector<Tensor>& parts);
Tensor mean_of(Tape* tape, const std::vector<Tensor>& parts);
// Row r of a matrix, as a vector (embedding lookup).
Tensor row(Tape* tape, const Tensor& m, std::size_t r);
Tensor softmax(Tape* tape, const Tensor& x);
// -sum_k truth[k] * log(pred[k] + 1e-12), truth strictly one-hot.
Tensor cross_entropy(Tape* tape, const Tensor& pred, const Tensor& truth);
// Sum of squared entries, skipping the first `skip_leading` flat entries.
Tensor sum_squares(Tape* tape, const Tensor& x, std::size_t skip_leading = 0);

Tensor one_hot(std::size_t k, std::size_t index);

// Central-difference gradient verification. `fn` must rebuild the scalar loss
// from the given parameter tensors; it is called once on a tape for analytic
// gradients and twice per parameter entry for the numeric estimate. Returns
// the max over entries of |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
struct CheckedParam {
    std::string name;
    Tensor value;
};
using LossFn = std::function<Tensor(Tape*, const std::vector<Tensor>&)>;
double finite_diff_check(const LossFn& fn, const std::vector<CheckedParam>& params,
                         double step);

}  // namespace newscred
