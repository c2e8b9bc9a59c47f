#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "relconv/common.hpp"

namespace relconv {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::unique_ptr<std::vector<double>> grad;  // absent until first accumulation

    void accumulate(const std::vector<double>& g) {
        if (!grad) grad = std::make_unique<std::vector<double>>(data.size(), 0.0);
        for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
    }
    std::vector<double>& grad_buffer() {
        if (!grad) grad = std::make_unique<std::vector<double>>(data.size(), 0.0);
        return *grad;
    }
};

}  // namespace detail

/// Dense row-major tensor of doubles. Value-semantics handle sharing one node,
/// so copies alias the same storage and gradient accumulator.
class Tensor {
public:
    using NodePtr = std::shared_ptr<detail::TensorNode>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return make(std::move(shape), {}, requires_grad, 0.0);
    }
    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        return make(std::move(shape), {}, requires_grad, value);
    }
    static Tensor scalar(double value, bool requires_grad = false) {
        return from_data({}, {value}, requires_grad);
    }
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        if (shape_numel(shape) != data.size()) {
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match data length " +
                                        std::to_string(data.size()));
        }
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        t.node_->requires_grad = requires_grad;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return checked().shape; }
    std::size_t rank() const { return checked().shape.size(); }
    std::size_t numel() const { return checked().data.size(); }
    std::size_t extent(std::size_t axis) const { return checked().shape.at(axis); }

    const std::vector<double>& data() const { return checked().data; }
    /// Mutable raw storage; used by initializers and the optimizer on leaves.
    std::vector<double>& values() { return checked().data; }

    double value() const {
        if (numel() != 1) throw std::invalid_argument("tensor: value() needs a single element, shape is " + shape_str(shape()));
        return checked().data[0];
    }
    double at(std::size_t i) const { return checked().data.at(i); }
    double at(std::size_t i, std::size_t j) const {
        const auto& n = checked();
        return n.data.at(i * n.shape.at(1) + j);
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        const auto& n = checked();
        return n.data.at((i * n.shape.at(1) + j) * n.shape.at(2) + k);
    }

    bool requires_grad() const { return checked().requires_grad; }
    void set_requires_grad(bool rg) { checked().requires_grad = rg; }

    /// Accumulated gradient, or nullptr when none has been produced.
    const std::vector<double>* grad() const { return checked().grad.get(); }
    void clear_grad() { checked().grad.reset(); }

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

    const NodePtr& node() const { return node_; }

private:
    static Tensor make(Shape shape, std::vector<double>, bool requires_grad, double fill) {
        std::size_t n = shape_numel(shape);
        Tensor t;
        t.node_ = std::make_shared<detail::TensorNode>();
        t.node_->shape = std::move(shape);
        t.node_->data.assign(n, fill);
        t.node_->requires_grad = requires_grad;
        return t;
    }
    detail::TensorNode& checked() const {
        if (!node_) throw std::logic_error("tensor: use of default-constructed handle");
        return *node_;
    }

    NodePtr node_;
};

/// Linear record of executed primitives. backward() replays the records in
/// reverse exactly once; records whose output never received a gradient are
/// skipped, so tensors not reachable from the loss keep no gradient.
class Tape {
public:
    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    std::size_t size() const { return steps_.size(); }
    bool consumed() const { return consumed_; }

    void backward(const Tensor& loss) {
        if (consumed_) throw std::logic_error("tape: backward() on a consumed tape");
        if (loss.numel() != 1) {
            throw std::invalid_argument("tape: loss must be scalar, got shape " + shape_str(loss.shape()));
        }
        loss.node()->grad_buffer()[0] += 1.0;
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
        steps_.clear();
        consumed_ = true;
    }

    void reset() {
        steps_.clear();
        consumed_ = false;
    }

private:
    std::vector<std::function<void()>> steps_;
    bool consumed_ = false;
};

namespace detail {

inline bool want_grad(const Tensor& t) { return t.requires_grad(); }

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Every op computes its value eagerly and, when `tape`
// is non-null and gradients are wanted, records one backward step. Binary
// elementwise ops accept equal shapes or a single-element operand broadcast
// against the other; there is no implicit broadcasting beyond that.
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), n = a.extent(1), p = b.extent(1);
    std::vector<double> out(m * p, 0.0);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < n; ++kk) {
            const double av = ad[i * n + kk];
            if (av == 0.0) continue;
            const double* brow = bd.data() + kk * p;
            double* orow = out.data() + i * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += av * brow[j];
        }
    }
    Tensor c = Tensor::from_data({m, p}, std::move(out), a.requires_grad() || b.requires_grad());
    if (tape && c.requires_grad()) {
        auto an = a.node(), bn = b.node(), cn = c.node();
        tape->record([an, bn, cn, m, n, p] {
            if (!cn->grad) return;
            const auto& gc = *cn->grad;
            if (an->requires_grad) {
                auto& ga = an->grad_buffer();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < n; ++kk) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < p; ++j) s += gc[i * p + j] * bn->data[kk * p + j];
                        ga[i * n + kk] += s;
                    }
            }
            if (bn->requires_grad) {
                auto& gb = bn->grad_buffer();
                for (std::size_t kk = 0; kk < n; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double av = an->data[i * n + kk];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < p; ++j) gb[kk * p + j] += av * gc[i * p + j];
                    }
            }
        });
    }
    return c;
}

namespace detail {

// Shared skeleton for add/sub/mul/div with optional single-element broadcast.
template <typename Fwd, typename Bwd>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, Tape* tape, Fwd fwd, Bwd bwd) {
    bool a_scalar = false, b_scalar = false;
    if (a.shape() != b.shape()) {
        if (b.numel() == 1)
            b_scalar = true;
        else if (a.numel() == 1)
            a_scalar = true;
        else
            check_same_shape(a, b, name);
    }
    const Shape& out_shape = a_scalar ? b.shape() : a.shape();
    const std::size_t n = shape_numel(out_shape);
    std::vector<double> out(n);
    const auto& ad = a.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[a_scalar ? 0 : i], bd[b_scalar ? 0 : i]);
    Tensor c = Tensor::from_data(out_shape, std::move(out), a.requires_grad() || b.requires_grad());
    if (tape && c.requires_grad()) {
        auto an = a.node(), bn = b.node(), cn = c.node();
        tape->record([an, bn, cn, n, a_scalar, b_scalar, bwd] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            for (std::size_t i = 0; i < n; ++i) {
                const double av = an->data[a_scalar ? 0 : i];
                const double bv = bn->data[b_scalar ? 0 : i];
                const auto [da, db] = bwd(av, bv, cn->data[i]);
                if (an->requires_grad) an->grad_buffer()[a_scalar ? 0 : i] += da * g[i];
                if (bn->requires_grad) bn->grad_buffer()[b_scalar ? 0 : i] += db * g[i];
            }
        });
    }
    return c;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Tape* tape, Fwd fwd, Bwd bwd) {
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    const auto& ad = a.data();
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i]);
    Tensor c = Tensor::from_data(a.shape(), std::move(out), a.requires_grad());
    if (tape && c.requires_grad()) {
        auto an = a.node(), cn = c.node();
        tape->record([an, cn, n, bwd] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            auto& ga = an->grad_buffer();
            for (std::size_t i = 0; i < n; ++i) ga[i] += bwd(an->data[i], cn->data[i]) * g[i];
        });
    }
    return c;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return detail::binary_op(
        "add", a, b, tape, [](double x, double y) { return x + y; },
        [](double, double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

inline Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return detail::binary_op(
        "sub", a, b, tape, [](double x, double y) { return x - y; },
        [](double, double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

inline Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return detail::binary_op(
        "mul", a, b, tape, [](double x, double y) { return x * y; },
        [](double x, double y, double) { return std::pair<double, double>{y, x}; });
}

inline Tensor div(const Tensor& a, const Tensor& b, Tape* tape = nullptr) {
    return detail::binary_op(
        "div", a, b, tape, [](double x, double y) { return x / y; },
        [](double x, double y, double) {
            return std::pair<double, double>{1.0 / y, -x / (y * y)};
        });
}

inline Tensor scale(const Tensor& a, double c, Tape* tape = nullptr) {
    return detail::unary_op(
        a, tape, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor sigmoid(const Tensor& a, Tape* tape = nullptr) {
    return detail::unary_op(
        a, tape,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a, Tape* tape = nullptr) {
    return detail::unary_op(
        a, tape, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a, Tape* tape = nullptr) {
    return detail::unary_op(
        a, tape, [](double x) { return x > 0.0 || std::isnan(x) ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor sqrt(const Tensor& a, Tape* tape = nullptr) {
    return detail::unary_op(
        a, tape, [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

enum class Reduce { sum, mean, max };

inline Tensor reduce(Reduce op, const Tensor& t, std::size_t axis, Tape* tape = nullptr) {
    if (axis >= t.rank()) {
        throw std::invalid_argument("reduce: axis " + std::to_string(axis) + " out of rank " +
                                    std::to_string(t.rank()));
    }
    const Shape& in = t.shape();
    const std::size_t extent = in[axis];
    if (extent == 0) throw std::invalid_argument("reduce: empty reduction over axis " + std::to_string(axis));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= in[i];
    for (std::size_t i = axis + 1; i < in.size(); ++i) inner *= in[i];
    Shape out_shape;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (i != axis) out_shape.push_back(in[i]);

    std::vector<double> out(outer * inner, 0.0);
    std::vector<std::size_t> argmax;
    if (op == Reduce::max) argmax.assign(outer * inner, 0);
    const auto& d = t.data();
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t oi = o * inner + i;
            if (op == Reduce::max) {
                double best = d[(o * extent) * inner + i];
                std::size_t best_a = 0;
                for (std::size_t a = 1; a < extent; ++a) {
                    const double v = d[(o * extent + a) * inner + i];
                    if (v > best) {  // ties keep the lowest index
                        best = v;
                        best_a = a;
                    }
                }
                out[oi] = best;
                argmax[oi] = best_a;
            } else {
                double s = 0.0;
                for (std::size_t a = 0; a < extent; ++a) s += d[(o * extent + a) * inner + i];
                out[oi] = op == Reduce::mean ? s / static_cast<double>(extent) : s;
            }
        }
    }
    Tensor c = Tensor::from_data(std::move(out_shape), std::move(out), t.requires_grad());
    if (tape && c.requires_grad()) {
        auto tn = t.node(), cn = c.node();
        tape->record([tn, cn, op, outer, inner, extent, argmax = std::move(argmax)] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            auto& gt = tn->grad_buffer();
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t oi = o * inner + i;
                    switch (op) {
                        case Reduce::sum:
                            for (std::size_t a = 0; a < extent; ++a) gt[(o * extent + a) * inner + i] += g[oi];
                            break;
                        case Reduce::mean:
                            for (std::size_t a = 0; a < extent; ++a)
                                gt[(o * extent + a) * inner + i] += g[oi] / static_cast<double>(extent);
                            break;
                        case Reduce::max:
                            gt[(o * extent + argmax[oi]) * inner + i] += g[oi];
                            break;
                    }
                }
            }
        });
    }
    return c;
}

inline Tensor reduce_sum(const Tensor& t, std::size_t axis, Tape* tape = nullptr) {
    return reduce(Reduce::sum, t, axis, tape);
}
inline Tensor reduce_mean(const Tensor& t, std::size_t axis, Tape* tape = nullptr) {
    return reduce(Reduce::mean, t, axis, tape);
}
inline Tensor reduce_max(const Tensor& t, std::size_t axis, Tape* tape = nullptr) {
    return reduce(Reduce::max, t, axis, tape);
}

/// Select rows (rank 2) or elements (rank 1) by index, in idx order.
/// Duplicates are allowed; backward scatter-adds into the source.
inline Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& idx, Tape* tape = nullptr) {
    if (t.rank() != 1 && t.rank() != 2) {
        throw std::invalid_argument("gather_rows: rank must be 1 or 2, got " + shape_str(t.shape()));
    }
    if (idx.empty()) throw std::invalid_argument("gather_rows: empty index list");
    const std::size_t n = t.extent(0);
    const std::size_t width = t.rank() == 2 ? t.extent(1) : 1;
    for (std::size_t v : idx) {
        if (v >= n) {
            throw std::out_of_range("gather_rows: index " + std::to_string(v) + " out of range [0," +
                                    std::to_string(n) + ")");
        }
    }
    std::vector<double> out(idx.size() * width);
    const auto& d = t.data();
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(d.data() + idx[i] * width, width, out.data() + i * width);
    Shape out_shape = t.rank() == 2 ? Shape{idx.size(), width} : Shape{idx.size()};
    Tensor c = Tensor::from_data(std::move(out_shape), std::move(out), t.requires_grad());
    if (tape && c.requires_grad()) {
        auto tn = t.node(), cn = c.node();
        tape->record([tn, cn, idx, width] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            auto& gt = tn->grad_buffer();
            for (std::size_t i = 0; i < idx.size(); ++i)
                for (std::size_t j = 0; j < width; ++j) gt[idx[i] * width + j] += g[i * width + j];
        });
    }
    return c;
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis, Tape* tape = nullptr) {
    if (parts.empty()) throw std::invalid_argument("concat: no tensors given");
    const std::size_t rank = parts[0].rank();
    if (axis >= rank) throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of rank");
    std::size_t total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
        for (std::size_t i = 0; i < rank; ++i) {
            if (i != axis && p.shape()[i] != parts[0].shape()[i]) {
                throw std::invalid_argument("concat: incompatible shapes " + shape_str(parts[0].shape()) +
                                            " vs " + shape_str(p.shape()));
            }
        }
        total += p.shape()[axis];
        rg = rg || p.requires_grad();
    }
    Shape out_shape = parts[0].shape();
    out_shape[axis] = total;
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= out_shape[i];
    for (std::size_t i = axis + 1; i < rank; ++i) inner *= out_shape[i];

    std::vector<double> out(shape_numel(out_shape));
    std::size_t offset = 0;  // running offset along axis
    for (const auto& p : parts) {
        const std::size_t ext = p.shape()[axis];
        const auto& d = p.data();
        for (std::size_t o = 0; o < outer; ++o) {
            std::copy_n(d.data() + o * ext * inner, ext * inner,
                        out.data() + (o * total + offset) * inner);
        }
        offset += ext;
    }
    Tensor c = Tensor::from_data(std::move(out_shape), std::move(out), rg);
    if (tape && c.requires_grad()) {
        std::vector<Tensor::NodePtr> nodes;
        std::vector<std::size_t> extents;
        for (const auto& p : parts) {
            nodes.push_back(p.node());
            extents.push_back(p.shape()[axis]);
        }
        auto cn = c.node();
        tape->record([nodes = std::move(nodes), extents = std::move(extents), cn, outer, inner, total] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            std::size_t offset = 0;
            for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                const std::size_t ext = extents[pi];
                if (nodes[pi]->requires_grad) {
                    auto& gp = nodes[pi]->grad_buffer();
                    for (std::size_t o = 0; o < outer; ++o)
                        for (std::size_t e = 0; e < ext * inner; ++e)
                            gp[o * ext * inner + e] += g[(o * total + offset) * inner + e];
                }
                offset += ext;
            }
        });
    }
    return c;
}

inline Tensor reshape(const Tensor& t, Shape new_shape, Tape* tape = nullptr) {
    if (shape_numel(new_shape) != t.numel()) {
        throw std::invalid_argument("reshape: cannot view " + shape_str(t.shape()) + " as " +
                                    shape_str(new_shape));
    }
    Tensor c = Tensor::from_data(std::move(new_shape), t.data(), t.requires_grad());
    if (tape && c.requires_grad()) {
        auto tn = t.node(), cn = c.node();
        tape->record([tn, cn] {
            if (!cn->grad) return;
            tn->accumulate(*cn->grad);
        });
    }
    return c;
}

/// Multiply row i of x (n x d) by s[i]. The explicit column-broadcast used by
/// the pooling gate, replacing an outer product with an all-ones row vector.
inline Tensor scale_rows(const Tensor& x, const Tensor& s, Tape* tape = nullptr) {
    if (x.rank() != 2 || s.rank() != 1 || x.extent(0) != s.extent(0)) {
        throw std::invalid_argument("scale_rows: need (n,d) and (n), got " + shape_str(x.shape()) + " and " +
                                    shape_str(s.shape()));
    }
    const std::size_t n = x.extent(0), d = x.extent(1);
    std::vector<double> out(n * d);
    const auto& xd = x.data();
    const auto& sd = s.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xd[i * d + j] * sd[i];
    Tensor c = Tensor::from_data(x.shape(), std::move(out), x.requires_grad() || s.requires_grad());
    if (tape && c.requires_grad()) {
        auto xn = x.node(), sn = s.node(), cn = c.node();
        tape->record([xn, sn, cn, n, d] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            if (xn->requires_grad) {
                auto& gx = xn->grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[i * d + j] * sn->data[i];
            }
            if (sn->requires_grad) {
                auto& gs = sn->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < d; ++j) acc += g[i * d + j] * xn->data[i * d + j];
                    gs[i] += acc;
                }
            }
        });
    }
    return c;
}

/// Add bias vector b (d) to every row of x (n x d).
inline Tensor add_rows(const Tensor& x, const Tensor& b, Tape* tape = nullptr) {
    if (x.rank() != 2 || b.rank() != 1 || x.extent(1) != b.extent(0)) {
        throw std::invalid_argument("add_rows: need (n,d) and (d), got " + shape_str(x.shape()) + " and " +
                                    shape_str(b.shape()));
    }
    const std::size_t n = x.extent(0), d = x.extent(1);
    std::vector<double> out(n * d);
    const auto& xd = x.data();
    const auto& bd = b.data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) out[i * d + j] = xd[i * d + j] + bd[j];
    Tensor c = Tensor::from_data(x.shape(), std::move(out), x.requires_grad() || b.requires_grad());
    if (tape && c.requires_grad()) {
        auto xn = x.node(), bn = b.node(), cn = c.node();
        tape->record([xn, bn, cn, n, d] {
            if (!cn->grad) return;
            const auto& g = *cn->grad;
            if (xn->requires_grad) xn->accumulate(g);
            if (bn->requires_grad) {
                auto& gb = bn->grad_buffer();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
            }
        });
    }
    return c;
}

/// Mean over rows of -log softmax(logits)[label]; max-subtraction stabilized.
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels,
                                    Tape* tape = nullptr) {
    if (logits.rank() != 2) {
        throw std::invalid_argument("softmax_cross_entropy: logits must be (n,c), got " +
                                    shape_str(logits.shape()));
    }
    const std::size_t n = logits.extent(0), c = logits.extent(1);
    if (labels.size() != n) {
        throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(n) + " rows");
    }
    for (std::size_t y : labels) {
        if (y >= c) {
            throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(y) + " out of [0," +
                                    std::to_string(c) + ")");
        }
    }
    const auto& d = logits.data();
    std::vector<double> probs(n * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = d[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, d[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            probs[i * c + j] = std::exp(d[i * c + j] - mx);
            z += probs[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
        loss -= d[i * c + labels[i]] - mx - std::log(z);
    }
    loss /= static_cast<double>(n);
    Tensor out = Tensor::from_data({}, {loss}, logits.requires_grad());
    if (tape && out.requires_grad()) {
        auto ln = logits.node(), on = out.node();
        tape->record([ln, on, labels, probs = std::move(probs), n, c] {
            if (!on->grad) return;
            const double g = (*on->grad)[0] / static_cast<double>(n);
            auto& gl = ln->grad_buffer();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < c; ++j)
                    gl[i * c + j] += g * (probs[i * c + j] - (j == labels[i] ? 1.0 : 0.0));
        });
    }
    return out;
}

}  // namespace relconv
