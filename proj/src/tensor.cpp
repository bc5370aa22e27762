#include "newscred/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "newscred/errors.hpp"

namespace newscred {

namespace {

constexpr double kLogEps = 1e-12;

// Smallest positive double; used to keep sigmoid/softmax outputs strictly
// positive when the true value underflows.
const double kTiny = std::numeric_limits<double>::denorm_min();
// Largest double below 1.
const double kBelowOne = std::nextafter(1.0, 0.0);
const double kBelowMinusOne = std::nextafter(-1.0, 0.0);

double stable_sigmoid(double x) {
    double v;
    if (x >= 0.0) {
        v = 1.0 / (1.0 + std::exp(-x));
    } else {
        double e = std::exp(x);
        v = e / (1.0 + e);
    }
    // Saturate into the open interval (0, 1).
    if (v <= 0.0) v = kTiny;
    if (v >= 1.0) v = kBelowOne;
    return v;
}

double clamped_tanh(double x) {
    double v = std::tanh(x);
    if (v >= 1.0) v = kBelowOne;
    if (v <= -1.0) v = kBelowMinusOne;
    return v;
}

bool any_nonzero(const std::vector<double>& v) {
    for (double x : v)
        if (x != 0.0) return true;
    return false;
}

void require_vector(const Tensor& t, const char* what) {
    if (t.shape().size() != 1)
        throw DimensionError(std::string(what) + ": expected a vector, got shape " +
                             shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

int node_or_minus1(const Tensor& t) { return t.tracked() ? t.node() : -1; }

void check_owner(const Tape* tape, const Tensor& t, const char* what) {
    if (t.tracked() && t.owner() != tape)
        throw UsageError(std::string(what) + ": input tensor belongs to a different tape");
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
    std::size_t n = 1;
    for (std::size_t d : shape_) n *= d;
    if (shape_.empty() || n != values.size())
        throw DimensionError("tensor: shape " + shape_str(shape_) + " does not match " +
                             std::to_string(values.size()) + " values");
    data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vec(std::vector<double> values) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
    return Tensor(std::move(shape), std::move(v));
}

std::size_t Tensor::numel() const { return data_ ? data_->size() : 0; }

std::size_t Tensor::rows() const {
    if (shape_.size() != 2)
        throw DimensionError("rows: expected a matrix, got shape " + shape_str(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (shape_.size() != 2)
        throw DimensionError("cols: expected a matrix, got shape " + shape_str(shape_));
    return shape_[1];
}

double Tensor::item() const {
    if (numel() != 1)
        throw UsageError("item: tensor has " + std::to_string(numel()) + " elements");
    return (*data_)[0];
}

int Tape::push(std::size_t numel, Pull pull) {
    nodes_.push_back(Node{numel, std::move(pull), {}});
    return static_cast<int>(nodes_.size()) - 1;
}

Tensor Tape::adopt(Shape shape, std::vector<double> values, int node) {
    Tensor t(std::move(shape), std::move(values));
    t.node_ = node;
    t.owner_ = this;
    return t;
}

Tensor Tape::track(const Tensor& value) {
    if (value.tracked()) throw UsageError("track: tensor is already on a tape");
    Tensor t = value;
    t.node_ = push(value.numel(), Pull{});
    t.owner_ = this;
    return t;
}

void Tape::backward(const Tensor& loss) {
    if (!loss.tracked() || loss.owner() != this)
        throw UsageError("backward: loss is not recorded on this tape");
    if (loss.numel() != 1)
        throw UsageError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    for (auto& n : nodes_) n.grad.assign(n.numel, 0.0);
    nodes_[static_cast<std::size_t>(loss.node())].grad[0] = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (n.pull && any_nonzero(n.grad)) n.pull(*this, n.grad);
    }
    ran_backward_ = true;
}

Tensor Tape::grad(const Tensor& t) const {
    if (!t.tracked() || t.owner() != this)
        throw UsageError("grad: tensor is not recorded on this tape");
    if (!ran_backward_) throw UsageError("grad: backward has not been run");
    const Node& n = nodes_[static_cast<std::size_t>(t.node())];
    return Tensor(t.shape(), n.grad);
}

Tensor affine(Tape* tape, const Tensor& w, const Tensor& x, const Tensor& b) {
    if (w.shape().size() != 2)
        throw DimensionError("affine: weight must be a matrix, got shape " + shape_str(w.shape()));
    require_vector(x, "affine");
    require_vector(b, "affine");
    const std::size_t m = w.rows(), n = w.cols();
    if (x.numel() != n || b.numel() != m)
        throw DimensionError("affine: weight " + shape_str(w.shape()) + " incompatible with x " +
                             shape_str(x.shape()) + " and b " + shape_str(b.shape()));
    check_owner(tape, w, "affine");
    check_owner(tape, x, "affine");
    check_owner(tape, b, "affine");

    const auto& wd = w.values();
    const auto& xd = x.values();
    std::vector<double> out(b.values());
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* wrow = wd.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += wrow[j] * xd[j];
        out[i] += acc;
    }

    if (!tape || (!w.tracked() && !x.tracked() && !b.tracked()))
        return Tensor(Shape{m}, std::move(out));

    const int wi = node_or_minus1(w), xi = node_or_minus1(x), bi = node_or_minus1(b);
    auto wdp = w.values().data();
    auto xdp = x.values().data();
    // keep storage alive inside the closure
    Tensor wk = w, xk = x;
    int node = tape->push(m, [=](Tape& tp, const std::vector<double>& g) {
        (void)wk;
        (void)xk;
        if (wi >= 0) {
            auto& gw = tp.grad_of(wi);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += g[i] * xdp[j];
        }
        if (xi >= 0) {
            auto& gx = tp.grad_of(xi);
            for (std::size_t i = 0; i < m; ++i) {
                const double gi = g[i];
                const double* wrow = wdp + i * n;
                for (std::size_t j = 0; j < n; ++j) gx[j] += wrow[j] * gi;
            }
        }
        if (bi >= 0) {
            auto& gb = tp.grad_of(bi);
            for (std::size_t i = 0; i < m; ++i) gb[i] += g[i];
        }
    });
    return tape->adopt(Shape{m}, std::move(out), node);
}

namespace {

Tensor binary_elementwise(Tape* tape, const Tensor& a, const Tensor& b, const char* what,
                          double (*f)(double, double),
                          void (*pull)(const std::vector<double>&, const Tensor&, const Tensor&,
                                       int, int, Tape&)) {
    require_same_shape(a, b, what);
    check_owner(tape, a, what);
    check_owner(tape, b, what);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.at(i), b.at(i));
    if (!tape || (!a.tracked() && !b.tracked())) return Tensor(a.shape(), std::move(out));
    const int ai = node_or_minus1(a), bi = node_or_minus1(b);
    Tensor ak = a, bk = b;
    int node = tape->push(out.size(), [=](Tape& tp, const std::vector<double>& g) {
        pull(g, ak, bk, ai, bi, tp);
    });
    return tape->adopt(a.shape(), std::move(out), node);
}

}  // namespace

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "add", [](double x, double y) { return x + y; },
        [](const std::vector<double>& g, const Tensor&, const Tensor&, int ai, int bi, Tape& tp) {
            if (ai >= 0) {
                auto& ga = tp.grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bi >= 0) {
                auto& gb = tp.grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
}

Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "sub", [](double x, double y) { return x - y; },
        [](const std::vector<double>& g, const Tensor&, const Tensor&, int ai, int bi, Tape& tp) {
            if (ai >= 0) {
                auto& ga = tp.grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (bi >= 0) {
                auto& gb = tp.grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
            }
        });
}

Tensor hadamard(Tape* tape, const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        tape, a, b, "hadamard", [](double x, double y) { return x * y; },
        [](const std::vector<double>& g, const Tensor& a, const Tensor& b, int ai, int bi,
           Tape& tp) {
            if (ai >= 0) {
                auto& ga = tp.grad_of(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.at(i);
            }
            if (bi >= 0) {
                auto& gb = tp.grad_of(bi);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.at(i);
            }
        });
}

namespace {

Tensor unary_elementwise(Tape* tape, const Tensor& x, const char* what, double (*f)(double),
                         double (*dfdv)(double /*out*/, double /*in*/)) {
    check_owner(tape, x, what);
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x.at(i));
    if (!tape || !x.tracked()) return Tensor(x.shape(), std::move(out));
    const int xi = x.node();
    Tensor xk = x;
    std::vector<double> outv = out;
    int node = tape->push(out.size(), [=](Tape& tp, const std::vector<double>& g) {
        auto& gx = tp.grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dfdv(outv[i], xk.at(i));
    });
    return tape->adopt(x.shape(), std::move(out), node);
}

}  // namespace

Tensor sigmoid(Tape* tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, "sigmoid", [](double v) { return stable_sigmoid(v); },
        [](double out, double) { return out * (1.0 - out); });
}

Tensor tanh_op(Tape* tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, "tanh", [](double v) { return clamped_tanh(v); },
        [](double out, double) { return 1.0 - out * out; });
}

Tensor one_minus(Tape* tape, const Tensor& x) {
    return unary_elementwise(
        tape, x, "one_minus", [](double v) { return 1.0 - v; },
        [](double, double) { return -1.0; });
}

Tensor scale(Tape* tape, double c, const Tensor& x) {
    check_owner(tape, x, "scale");
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * x.at(i);
    if (!tape || !x.tracked()) return Tensor(x.shape(), std::move(out));
    const int xi = x.node();
    int node = tape->push(out.size(), [=](Tape& tp, const std::vector<double>& g) {
        auto& gx = tp.grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += c * g[i];
    });
    return tape->adopt(x.shape(), std::move(out), node);
}

Tensor concat(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("concat: empty part list");
    if (parts.size() == 1) return parts[0];
    std::size_t total = 0;
    bool tracked = false;
    for (const auto& p : parts) {
        require_vector(p, "concat");
        check_owner(tape, p, "concat");
        total += p.numel();
        tracked = tracked || p.tracked();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    if (!tape || !tracked) return Tensor(Shape{total}, std::move(out));
    std::vector<int> ids(parts.size());
    std::vector<std::size_t> sizes(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        ids[i] = node_or_minus1(parts[i]);
        sizes[i] = parts[i].numel();
    }
    int node = tape->push(total, [=](Tape& tp, const std::vector<double>& g) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= 0) {
                auto& gp = tp.grad_of(ids[i]);
                for (std::size_t j = 0; j < sizes[i]; ++j) gp[j] += g[off + j];
            }
            off += sizes[i];
        }
    });
    return tape->adopt(Shape{total}, std::move(out), node);
}

namespace {

Tensor reduce_parts(Tape* tape, const std::vector<Tensor>& parts, double factor,
                    const char* what) {
    if (parts.empty()) throw UsageError(std::string(what) + ": empty part list");
    bool tracked = false;
    for (const auto& p : parts) {
        require_same_shape(parts[0], p, what);
        check_owner(tape, p, what);
        tracked = tracked || p.tracked();
    }
    std::vector<double> out(parts[0].numel(), 0.0);
    for (const auto& p : parts)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.at(i);
    for (double& v : out) v *= factor;
    if (!tape || !tracked) return Tensor(parts[0].shape(), std::move(out));
    std::vector<int> ids(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) ids[i] = node_or_minus1(parts[i]);
    int node = tape->push(out.size(), [=](Tape& tp, const std::vector<double>& g) {
        for (int id : ids) {
            if (id < 0) continue;
            auto& gp = tp.grad_of(id);
            for (std::size_t i = 0; i < g.size(); ++i) gp[i] += factor * g[i];
        }
    });
    return tape->adopt(parts[0].shape(), std::move(out), node);
}

}  // namespace

Tensor sum_of(Tape* tape, const std::vector<Tensor>& parts) {
    return reduce_parts(tape, parts, 1.0, "sum_of");
}

Tensor mean_of(Tape* tape, const std::vector<Tensor>& parts) {
    if (parts.empty()) throw UsageError("mean_of: empty part list");
    return reduce_parts(tape, parts, 1.0 / static_cast<double>(parts.size()), "mean_of");
}

Tensor row(Tape* tape, const Tensor& m, std::size_t r) {
    if (m.shape().size() != 2)
        throw DimensionError("row: expected a matrix, got shape " + shape_str(m.shape()));
    if (r >= m.rows())
        throw UsageError("row: index " + std::to_string(r) + " out of range for " +
                         shape_str(m.shape()));
    check_owner(tape, m, "row");
    const std::size_t n = m.cols();
    std::vector<double> out(m.values().begin() + r * n, m.values().begin() + (r + 1) * n);
    if (!tape || !m.tracked()) return Tensor(Shape{n}, std::move(out));
    const int mi = m.node();
    int node = tape->push(n, [=](Tape& tp, const std::vector<double>& g) {
        auto& gm = tp.grad_of(mi);
        for (std::size_t j = 0; j < n; ++j) gm[r * n + j] += g[j];
    });
    return tape->adopt(Shape{n}, std::move(out), node);
}

Tensor softmax(Tape* tape, const Tensor& x) {
    require_vector(x, "softmax");
    if (x.numel() == 0) throw DimensionError("softmax: empty input");
    check_owner(tape, x, "softmax");
    double mx = x.at(0);
    for (std::size_t i = 1; i < x.numel(); ++i) mx = std::max(mx, x.at(i));
    std::vector<double> out(x.numel());
    double total = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        out[i] = std::exp(x.at(i) - mx);
        total += out[i];
    }
    for (double& v : out) {
        v /= total;
        if (v <= 0.0) v = kTiny;  // keep strictly positive under extreme inputs
    }
    if (!tape || !x.tracked()) return Tensor(x.shape(), std::move(out));
    const int xi = x.node();
    std::vector<double> p = out;
    int node = tape->push(out.size(), [=](Tape& tp, const std::vector<double>& g) {
        double dot = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
        auto& gx = tp.grad_of(xi);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += p[i] * (g[i] - dot);
    });
    return tape->adopt(x.shape(), std::move(out), node);
}

Tensor cross_entropy(Tape* tape, const Tensor& pred, const Tensor& truth) {
    require_same_shape(pred, truth, "cross_entropy");
    require_vector(pred, "cross_entropy");
    check_owner(tape, pred, "cross_entropy");
    std::size_t ones = 0;
    for (std::size_t i = 0; i < truth.numel(); ++i) {
        if (truth.at(i) == 1.0)
            ++ones;
        else if (truth.at(i) != 0.0)
            throw UsageError("cross_entropy: truth is not one-hot (entry " + std::to_string(i) +
                             " = " + std::to_string(truth.at(i)) + ")");
    }
    if (ones != 1)
        throw UsageError("cross_entropy: truth is not one-hot (" + std::to_string(ones) +
                         " entries set)");
    double v = 0.0;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
        if (truth.at(i) == 1.0) {
            // clip at 1 so a perfect prediction costs exactly zero
            v -= std::log(std::min(1.0, pred.at(i) + kLogEps));
        }
    }
    if (!tape || !pred.tracked()) return Tensor::scalar(v);
    const int pi = pred.node();
    Tensor pk = pred, tk = truth;
    int node = tape->push(1, [=](Tape& tp, const std::vector<double>& g) {
        auto& gp = tp.grad_of(pi);
        for (std::size_t i = 0; i < pk.numel(); ++i) {
            if (tk.at(i) == 1.0) gp[i] -= g[0] / std::min(1.0, pk.at(i) + kLogEps);
        }
    });
    return tape->adopt(Shape{1}, std::vector<double>{v}, node);
}

Tensor sum_squares(Tape* tape, const Tensor& x, std::size_t skip_leading) {
    check_owner(tape, x, "sum_squares");
    if (skip_leading > x.numel())
        throw UsageError("sum_squares: skip_leading exceeds element count");
    double v = 0.0;
    for (std::size_t i = skip_leading; i < x.numel(); ++i) v += x.at(i) * x.at(i);
    if (!tape || !x.tracked()) return Tensor::scalar(v);
    const int xi = x.node();
    Tensor xk = x;
    int node = tape->push(1, [=](Tape& tp, const std::vector<double>& g) {
        auto& gx = tp.grad_of(xi);
        for (std::size_t i = skip_leading; i < xk.numel(); ++i) gx[i] += 2.0 * xk.at(i) * g[0];
    });
    return tape->adopt(Shape{1}, std::vector<double>{v}, node);
}

Tensor one_hot(std::size_t k, std::size_t index) {
    if (index >= k) throw UsageError("one_hot: index out of range");
    std::vector<double> v(k, 0.0);
    v[index] = 1.0;
    return Tensor::vec(std::move(v));
}

double finite_diff_check(const LossFn& fn, const std::vector<CheckedParam>& params, double step) {
    if (step <= 0.0) throw UsageError("finite_diff_check: step must be positive");
    std::vector<Tensor> values;
    values.reserve(params.size());
    for (const auto& p : params) values.push_back(p.value);

    Tape tape;
    std::vector<Tensor> tracked;
    tracked.reserve(params.size());
    for (const auto& v : values) tracked.push_back(tape.track(v));
    Tensor loss = fn(&tape, tracked);
    if (loss.numel() != 1) throw UsageError("finite_diff_check: fn must return a scalar");
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& t : tracked) analytic.push_back(tape.grad(t));

    double worst = 0.0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<double> base = values[p].values();
        for (std::size_t i = 0; i < base.size(); ++i) {
            auto eval_at = [&](double delta) {
                std::vector<Tensor> probe = values;
                std::vector<double> mod = base;
                mod[i] += delta;
                probe[p] = Tensor(values[p].shape(), std::move(mod));
                double v = fn(nullptr, probe).item();
                if (!std::isfinite(v))
                    throw UsageError("finite_diff_check: non-finite loss while perturbing " +
                                     params[p].name + "[" + std::to_string(i) + "]");
                return v;
            };
            double numeric = (eval_at(step) - eval_at(-step)) / (2.0 * step);
            double a = analytic[p].at(i);
            double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace newscred
