#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tensor.hpp"

namespace vwapforge {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; only valid while the
/// owning tape is alive.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode gradient tape over 2-D tensors.
///
/// Every operation appends a node holding its forward value and, when any
/// input requires a gradient, a backward rule. backward() walks the nodes in
/// reverse creation order and finally accumulates leaf gradients of bound
/// parameters into their ParamStore.
///
/// Subgradient conventions at non-differentiable points:
///   clamp(x, lo, hi): dx = 1 strictly inside (lo, hi), 0 at or outside; the
///     incoming gradient is routed to the active bound instead.
///   abs(x): derivative 0 at x == 0.
///   relu(x): derivative 0 at x == 0.
///
/// With kink recording enabled, each kink-bearing op appends the region of
/// every input element to a signature vector. Two evaluations with equal
/// signatures lie on the same smooth piece, which is what gradient checks use
/// to exclude finite-difference probes that straddle a kink.
class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(bool record_kinks = false) : record_kinks_(record_kinks) { nodes_.reserve(256); }

    /// Inference mode: parameters enter as constants, nothing is retained for
    /// a backward sweep and bound stores are never written.
    void disable_gradients() noexcept { gradients_ = false; }
    bool gradients_enabled() const noexcept { return gradients_; }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Non-differentiable input. Not checked for finiteness here so callers
    /// can report bad inputs with their own context.
    Var constant(Tensor value) { return push("constant", std::move(value), false, nullptr, false); }

    /// Differentiable leaf not bound to any ParamStore.
    Var variable(Tensor value) { return push("variable", std::move(value), true, nullptr); }

    /// Leaf bound to a ParamStore entry. Repeated calls return the same node.
    Var param(ParamStore& store, const std::string& name) {
        auto key = std::make_pair(&store, name);
        if (auto it = param_cache_.find(key); it != param_cache_.end()) return Var{this, it->second};
        if (!gradients_) {
            Var v = push("param", store.value(name), false, nullptr);
            param_cache_.emplace(std::move(key), v.id);
            return v;
        }
        Var v = push("param", store.value(name), true, nullptr);
        param_cache_.emplace(std::move(key), v.id);
        bindings_.push_back(Binding{v.id, &store, name});
        return v;
    }

    /// Runs the reverse sweep from a 1x1 loss node and adds the resulting leaf
    /// gradients into the bound ParamStore gradient buffers.
    void backward(Var loss) {
        check_owner(loss, "backward");
        if (nodes_[loss.id].value.size() != 1) {
            throw ShapeError("backward: loss must be a single scalar, got " +
                             shape_string(nodes_[loss.id].value.shape()));
        }
        if (!nodes_[loss.id].requires_grad) return;
        grad_ref(loss.id)[0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.has_grad || !n.backward) continue;
            n.backward(*this, i);
        }
        for (const auto& b : bindings_) {
            const Node& n = nodes_[b.id];
            if (!n.has_grad) continue;
            Tensor& g = b.store->grad(b.name);
            for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
        }
    }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& value(std::size_t id) const { return nodes_[id].value; }

    /// Gradient of the last backward() w.r.t. node v (zeros if untouched).
    Tensor grad(Var v) const {
        const Node& n = nodes_[v.id];
        if (n.has_grad) return n.grad;
        return Tensor(n.value.shape(), 0.0);
    }

    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

    /// Gradient buffer of a node, allocated on first touch.
    Tensor& grad_ref(std::size_t id) {
        Node& n = nodes_[id];
        if (!n.has_grad) {
            n.grad = Tensor(n.value.shape(), 0.0);
            n.has_grad = true;
        }
        return n.grad;
    }

    const Tensor& upstream(std::size_t self) const { return nodes_[self].grad; }

    Var push(const char* op, Tensor value, bool requires_grad, Backward backward, bool check_finite = true) {
        if (check_finite && !value.all_finite()) {
            throw NumericError(std::string("non-finite value produced by '") + op + "' at node " +
                               std::to_string(nodes_.size()));
        }
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.op = op;
        if (requires_grad) n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var{this, nodes_.size() - 1};
    }

    bool recording_kinks() const noexcept { return record_kinks_; }
    void note_kink(std::uint8_t region) { kinks_.push_back(region); }
    const std::vector<std::uint8_t>& kink_signature() const noexcept { return kinks_; }

    std::size_t size() const noexcept { return nodes_.size(); }
    const char* op_name(std::size_t id) const { return nodes_[id].op; }

    void check_owner(Var v, const char* op) const {
        if (v.tape != this || v.id >= nodes_.size()) {
            throw Error(std::string(op) + ": variable does not belong to this tape");
        }
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        bool has_grad = false;
        Backward backward;
        const char* op = "";
    };

    struct Binding {
        std::size_t id;
        ParamStore* store;
        std::string name;
    };

    std::vector<Node> nodes_;
    std::vector<Binding> bindings_;
    std::map<std::pair<ParamStore*, std::string>, std::size_t> param_cache_;
    bool record_kinks_;
    bool gradients_ = true;
    std::vector<std::uint8_t> kinks_;
};

inline const Tensor& Var::value() const { return tape->value(id); }

namespace detail {

inline Tape& common_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
    return *a.tape;
}

inline void require_same_shape(Var a, Var b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": lhs " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs rhs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

inline bool any_grad(Tape& t, std::initializer_list<Var> vs) {
    for (Var v : vs)
        if (t.requires_grad(v.id)) return true;
    return false;
}

// Elementwise unary op with derivative expressed through input x and output y.
template <class F, class DF>
Var unary(Var a, const char* op, F f, DF df) {
    Tape& t = *a.tape;
    const Tensor& x = a.value();
    Tensor y(Shape{x.rows(), x.cols()});
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    const std::size_t ia = a.id;
    return t.push(op, std::move(y), t.requires_grad(ia), [ia, df](Tape& tp, std::size_t self) {
        if (!tp.requires_grad(ia)) return;
        const Tensor& x = tp.value(ia);
        const Tensor& y = tp.value(self);
        const Tensor& g = tp.upstream(self);
        Tensor& ga = tp.grad_ref(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
    });
}

} // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra and elementwise arithmetic
// ---------------------------------------------------------------------------

/// (r x k) * (k x c) -> (r x c)
inline Var matmul(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "matmul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::size_t r = A.rows(), k = A.cols(), c = B.cols();
    if (B.rows() != k) {
        throw ShapeError("matmul: lhs " + std::to_string(r) + "x" + std::to_string(k) + " vs rhs " +
                         std::to_string(B.rows()) + "x" + std::to_string(c));
    }
    Tensor C = Tensor::matrix(r, c);
    const double* pa = A.values().data();
    const double* pb = B.values().data();
    double* pc = C.values().data();
    for (std::size_t i = 0; i < r; ++i) {
        double* crow = pc + i * c;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * c;
            for (std::size_t j = 0; j < c; ++j) crow[j] += av * brow[j];
        }
    }
    const std::size_t ia = a.id, ib = b.id;
    return t.push("matmul", std::move(C), detail::any_grad(t, {a, b}), [ia, ib, r, k, c](Tape& tp, std::size_t self) {
        const double* g = tp.upstream(self).values().data();
        if (tp.requires_grad(ia)) {
            const double* pb = tp.value(ib).values().data();
            double* ga = tp.grad_ref(ia).values().data();
            for (std::size_t i = 0; i < r; ++i) {
                const double* grow = g + i * c;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double* brow = pb + kk * c;
                    double s = 0.0;
                    for (std::size_t j = 0; j < c; ++j) s += grow[j] * brow[j];
                    ga[i * k + kk] += s;
                }
            }
        }
        if (tp.requires_grad(ib)) {
            const double* pa = tp.value(ia).values().data();
            double* gb = tp.grad_ref(ib).values().data();
            for (std::size_t i = 0; i < r; ++i) {
                const double* grow = g + i * c;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    const double av = pa[i * k + kk];
                    if (av == 0.0) continue;
                    double* gbrow = gb + kk * c;
                    for (std::size_t j = 0; j < c; ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    });
}

inline Var add(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "add");
    detail::require_same_shape(a, b, "add");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor C(Shape{A.rows(), A.cols()});
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] + B[i];
    const std::size_t ia = a.id, ib = b.id;
    return t.push("add", std::move(C), detail::any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        for (std::size_t id : {ia, ib}) {
            if (!tp.requires_grad(id)) continue;
            Tensor& gx = tp.grad_ref(id);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
    });
}

inline Var sub(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "sub");
    detail::require_same_shape(a, b, "sub");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor C(Shape{A.rows(), A.cols()});
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] - B[i];
    const std::size_t ia = a.id, ib = b.id;
    return t.push("sub", std::move(C), detail::any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (tp.requires_grad(ia)) {
            Tensor& gx = tp.grad_ref(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (tp.requires_grad(ib)) {
            Tensor& gx = tp.grad_ref(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] -= g[i];
        }
    });
}

/// Elementwise product.
inline Var mul(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "mul");
    detail::require_same_shape(a, b, "mul");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    Tensor C(Shape{A.rows(), A.cols()});
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * B[i];
    const std::size_t ia = a.id, ib = b.id;
    return t.push("mul", std::move(C), detail::any_grad(t, {a, b}), [ia, ib](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (tp.requires_grad(ia)) {
            const Tensor& B = tp.value(ib);
            Tensor& gx = tp.grad_ref(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * B[i];
        }
        if (tp.requires_grad(ib)) {
            const Tensor& A = tp.value(ia);
            Tensor& gx = tp.grad_ref(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * A[i];
        }
    });
}

/// a (r x c) + row vector b (1 x c) added to every row.
inline Var add_row(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "add_row");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::size_t r = A.rows(), c = A.cols();
    if (B.size() != c) {
        throw ShapeError("add_row: row vector of width " + std::to_string(B.size()) + " vs matrix width " +
                         std::to_string(c));
    }
    Tensor C = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) C[i * c + j] = A[i * c + j] + B[j];
    const std::size_t ia = a.id, ib = b.id;
    return t.push("add_row", std::move(C), detail::any_grad(t, {a, b}), [ia, ib, r, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (tp.requires_grad(ia)) {
            Tensor& gx = tp.grad_ref(ia);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        }
        if (tp.requires_grad(ib)) {
            Tensor& gb = tp.grad_ref(ib);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
        }
    });
}

/// a (r x c) scaled elementwise by row vector b (1 x c) on every row.
inline Var mul_row(Var a, Var b) {
    Tape& t = detail::common_tape(a, b, "mul_row");
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    const std::size_t r = A.rows(), c = A.cols();
    if (B.size() != c) {
        throw ShapeError("mul_row: row vector of width " + std::to_string(B.size()) + " vs matrix width " +
                         std::to_string(c));
    }
    Tensor C = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) C[i * c + j] = A[i * c + j] * B[j];
    const std::size_t ia = a.id, ib = b.id;
    return t.push("mul_row", std::move(C), detail::any_grad(t, {a, b}), [ia, ib, r, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        if (tp.requires_grad(ia)) {
            const Tensor& B = tp.value(ib);
            Tensor& gx = tp.grad_ref(ia);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[i * c + j] * B[j];
        }
        if (tp.requires_grad(ib)) {
            const Tensor& A = tp.value(ia);
            Tensor& gb = tp.grad_ref(ib);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j] * A[i * c + j];
        }
    });
}

inline Var scale(Var a, double s) {
    return detail::unary(
        a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

inline Var add_scalar(Var a, double s) {
    return detail::unary(
        a, "add_scalar", [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline double sigmoid_scalar(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double silu_scalar(double x) { return x * sigmoid_scalar(x); }

inline Var tanh(Var a) {
    return detail::unary(
        a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var a) {
    return detail::unary(a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

inline Var silu(Var a) {
    return detail::unary(a, "silu", silu_scalar, [](double x, double) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 + x * (1.0 - s));
    });
}

inline Var relu(Var a) {
    Tape& t = *a.tape;
    if (t.recording_kinks())
        for (double x : a.value().values()) t.note_kink(x > 0.0 ? 1 : 0);
    return detail::unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Var abs(Var a) {
    Tape& t = *a.tape;
    if (t.recording_kinks())
        for (double x : a.value().values()) t.note_kink(x > 0.0 ? 2 : (x < 0.0 ? 0 : 1));
    return detail::unary(
        a, "abs", [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Var square(Var a) {
    return detail::unary(
        a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

/// Row-wise softmax.
inline Var softmax_rows(Var a) {
    Tape& t = *a.tape;
    const Tensor& A = a.value();
    const std::size_t r = A.rows(), c = A.cols();
    Tensor Y = Tensor::matrix(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = A[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A[i * c + j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            Y[i * c + j] = std::exp(A[i * c + j] - mx);
            z += Y[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) Y[i * c + j] /= z;
    }
    const std::size_t ia = a.id;
    return t.push("softmax", std::move(Y), t.requires_grad(ia), [ia, r, c](Tape& tp, std::size_t self) {
        const Tensor& y = tp.value(self);
        const Tensor& g = tp.upstream(self);
        Tensor& ga = tp.grad_ref(ia);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
        }
    });
}

/// Elementwise clamp of x into [lo, hi]; all three operands share a shape and
/// lo <= hi is required. Gradient routing follows the Tape conventions.
inline Var clamp(Var x, Var lo, Var hi) {
    Tape& t = detail::common_tape(x, lo, "clamp");
    detail::common_tape(x, hi, "clamp");
    detail::require_same_shape(x, lo, "clamp(lo)");
    detail::require_same_shape(x, hi, "clamp(hi)");
    const Tensor& X = x.value();
    const Tensor& L = lo.value();
    const Tensor& H = hi.value();
    Tensor Y(Shape{X.rows(), X.cols()});
    std::vector<std::uint8_t> region(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (L[i] > H[i]) throw NumericError("clamp: lower bound exceeds upper bound at element " + std::to_string(i));
        if (X[i] <= L[i]) {
            Y[i] = L[i];
            region[i] = 0;
        } else if (X[i] >= H[i]) {
            Y[i] = H[i];
            region[i] = 2;
        } else {
            Y[i] = X[i];
            region[i] = 1;
        }
        if (t.recording_kinks()) t.note_kink(region[i]);
    }
    const std::size_t ix = x.id, il = lo.id, ih = hi.id;
    return t.push("clamp", std::move(Y), detail::any_grad(t, {x, lo, hi}),
                  [ix, il, ih, region = std::move(region)](Tape& tp, std::size_t self) {
                      const Tensor& g = tp.upstream(self);
                      const std::size_t targets[3] = {il, ix, ih};
                      for (std::size_t i = 0; i < g.size(); ++i) {
                          const std::size_t dst = targets[region[i]];
                          if (tp.requires_grad(dst)) tp.grad_ref(dst)[i] += g[i];
                      }
                  });
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

/// Column-wise concatenation of matrices sharing a row count.
inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no operands");
    Tape& t = *parts.front().tape;
    const std::size_t r = parts.front().rows();
    std::size_t total = 0;
    bool grad = false;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        if (parts[p].tape != &t) throw Error("concat_cols: operands on different tapes");
        if (parts[p].rows() != r) {
            throw ShapeError("concat_cols: operand " + std::to_string(p) + " has " + std::to_string(parts[p].rows()) +
                             " rows, expected " + std::to_string(r));
        }
        total += parts[p].cols();
        grad = grad || t.requires_grad(parts[p].id);
    }
    Tensor Y = Tensor::matrix(r, total);
    std::vector<std::pair<std::size_t, std::size_t>> layout;  // (node id, column offset)
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& P = p.value();
        const std::size_t c = P.cols();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) Y[i * total + off + j] = P[i * c + j];
        layout.emplace_back(p.id, off);
        off += c;
    }
    return t.push("concat_cols", std::move(Y), grad, [layout = std::move(layout), r, total](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        for (auto [id, off] : layout) {
            if (!tp.requires_grad(id)) continue;
            Tensor& gp = tp.grad_ref(id);
            const std::size_t c = gp.cols();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[i * total + off + j];
        }
    });
}

/// Columns [start, start + count) of a.
inline Var slice_cols(Var a, std::size_t start, std::size_t count) {
    Tape& t = *a.tape;
    const Tensor& A = a.value();
    const std::size_t r = A.rows(), c = A.cols();
    if (count == 0 || start + count > c) {
        throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of range for width " + std::to_string(c));
    }
    Tensor Y = Tensor::matrix(r, count);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < count; ++j) Y[i * count + j] = A[i * c + start + j];
    const std::size_t ia = a.id;
    return t.push("slice_cols", std::move(Y), t.requires_grad(ia), [ia, r, c, start, count](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        Tensor& ga = tp.grad_ref(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < count; ++j) ga[i * c + start + j] += g[i * count + j];
    });
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

inline Var sum(Var a) {
    Tape& t = *a.tape;
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    const std::size_t ia = a.id;
    return t.push("sum", Tensor({1, 1}, s), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
        const double g = tp.upstream(self)[0];
        Tensor& ga = tp.grad_ref(ia);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
}

inline Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

/// Sum across columns: (r x c) -> (r x 1).
inline Var row_sum(Var a) {
    Tape& t = *a.tape;
    const Tensor& A = a.value();
    const std::size_t r = A.rows(), c = A.cols();
    Tensor Y = Tensor::matrix(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += A[i * c + j];
        Y[i] = s;
    }
    const std::size_t ia = a.id;
    return t.push("row_sum", std::move(Y), t.requires_grad(ia), [ia, r, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        Tensor& ga = tp.grad_ref(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
    });
}

} // namespace vwapforge
