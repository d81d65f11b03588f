#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tape.hpp"

namespace vwapforge {

/// Uniform B-spline grid: `intervals` equal knot spans over [lower, upper],
/// extended by `order` knots on each side so the basis is a partition of
/// unity over the whole range.
struct SplineGrid {
    std::size_t intervals = 5;
    std::size_t order = 3;
    double lower = -1.0;
    double upper = 1.0;

    std::size_t basis_count() const { return intervals + order; }
    double spacing() const { return (upper - lower) / static_cast<double>(intervals); }
    double knot(std::size_t j) const {
        return lower + (static_cast<double>(j) - static_cast<double>(order)) * spacing();
    }

    void validate() const {
        if (intervals == 0) throw Error("spline grid: need at least one interval");
        if (!(upper > lower)) throw Error("spline grid: upper bound must exceed lower bound");
    }
};

namespace detail {

// Nonzero basis functions of the given degree at x (x already inside the
// grid range). Writes degree+1 values into out for basis indices
// span-degree .. span, and returns span (the knot-span index).
inline std::size_t bspline_nonzero(const SplineGrid& grid, double x, std::size_t degree, double* out) {
    const double h = grid.spacing();
    auto cell = static_cast<std::ptrdiff_t>(std::floor((x - grid.lower) / h));
    cell = std::clamp<std::ptrdiff_t>(cell, 0, static_cast<std::ptrdiff_t>(grid.intervals) - 1);
    const std::size_t span = grid.order + static_cast<std::size_t>(cell);
    double left[16];
    double right[16];
    out[0] = 1.0;
    for (std::size_t j = 1; j <= degree; ++j) {
        left[j] = x - grid.knot(span + 1 - j);
        right[j] = grid.knot(span + j) - x;
        double saved = 0.0;
        for (std::size_t r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    return span;
}

} // namespace detail

/// Values and first derivatives of every basis function at x. Inputs are
/// clamped to the grid range; the derivative is zero at or outside it.
inline void bspline_eval(const SplineGrid& grid, double x, double* values, double* derivs) {
    const std::size_t nb = grid.basis_count();
    const std::size_t k = grid.order;
    if (k > 14) throw Error("spline grid: order too large");
    std::fill(values, values + nb, 0.0);
    std::fill(derivs, derivs + nb, 0.0);
    const bool inside = x > grid.lower && x < grid.upper;
    const double xc = std::clamp(x, grid.lower, grid.upper);

    double top[16];
    const std::size_t span = detail::bspline_nonzero(grid, xc, k, top);
    for (std::size_t r = 0; r <= k; ++r) values[span - k + r] = top[r];

    if (!inside || k == 0) return;
    double lower_deg[16];
    detail::bspline_nonzero(grid, xc, k - 1, lower_deg);
    // B'_{i,k} = (B_{i,k-1} - B_{i+1,k-1}) / h on a uniform grid; the degree
    // k-1 values cover indices span-k+1 .. span.
    const double inv_h = 1.0 / grid.spacing();
    for (std::size_t r = 0; r <= k; ++r) {
        const std::size_t i = span - k + r;
        const double bi = (r >= 1) ? lower_deg[r - 1] : 0.0;      // B_{i,k-1}
        const double bnext = (r < k) ? lower_deg[r] : 0.0;       // B_{i+1,k-1}
        derivs[i] = (bi - bnext) * inv_h;
    }
}

/// Expands every column of s (r x n) into its spline basis:
/// output column i*nb + c holds B_c(clamp(s[:, i])).
inline Var bspline_basis(Var s, const SplineGrid& grid) {
    grid.validate();
    Tape& t = *s.tape;
    const Tensor& S = s.value();
    const std::size_t r = S.rows(), n = S.cols(), nb = grid.basis_count();
    Tensor Y = Tensor::matrix(r, n * nb);
    const bool grad = t.requires_grad(s.id);
    std::vector<double> dB(grad ? r * n * nb : 0);
    std::vector<double> scratch(nb);
    for (std::size_t row = 0; row < r; ++row) {
        for (std::size_t i = 0; i < n; ++i) {
            const double x = S[row * n + i];
            if (t.recording_kinks()) {
                t.note_kink(x <= grid.lower ? 0 : (x >= grid.upper ? 2 : 1));
            }
            double* vals = &Y[row * n * nb + i * nb];
            double* ders = grad ? &dB[(row * n + i) * nb] : scratch.data();
            bspline_eval(grid, x, vals, ders);
        }
    }
    const std::size_t is = s.id;
    return t.push("bspline_basis", std::move(Y), grad, [is, dB = std::move(dB), r, n, nb](Tape& tp, std::size_t self) {
        const Tensor& g = tp.upstream(self);
        Tensor& gs = tp.grad_ref(is);
        for (std::size_t row = 0; row < r; ++row)
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                const std::size_t base = (row * n + i) * nb;
                for (std::size_t c = 0; c < nb; ++c) acc += g[base + c] * dB[base + c];
                gs[row * n + i] += acc;
            }
    });
}

/// Shape of one Kolmogorov-Arnold layer.
struct KanLayerSpec {
    std::size_t inputs = 1;
    std::size_t outputs = 1;
    SplineGrid grid{};
};

/// Registers `<prefix>.base` (inputs x outputs) and `<prefix>.spline`
/// (inputs*(G+k) x outputs). Spline coefficients start at zero so a fresh
/// layer is the SiLU-mixed linear map.
inline void kan_register(ParamStore& store, const std::string& prefix, const KanLayerSpec& spec) {
    spec.grid.validate();
    store.add(prefix + ".base", {spec.inputs, spec.outputs}, Init::glorot_uniform);
    store.add(prefix + ".spline", {spec.inputs * spec.grid.basis_count(), spec.outputs}, Init::zeros);
}

/// out_j = sum_i w_base[i][j] * SiLU(s_i) + sum_i sum_c coef[i*nb + c][j] * B_c(clamp(s_i))
inline Var kan_layer(Tape& t, ParamStore& store, const std::string& prefix, const KanLayerSpec& spec, Var s) {
    if (s.cols() != spec.inputs) {
        throw ShapeError("kan_layer " + prefix + ": input width " + std::to_string(s.cols()) + ", expected " +
                         std::to_string(spec.inputs));
    }
    Var base = matmul(silu(s), t.param(store, prefix + ".base"));
    Var spline = matmul(bspline_basis(s, spec.grid), t.param(store, prefix + ".spline"));
    return add(base, spline);
}

} // namespace vwapforge
