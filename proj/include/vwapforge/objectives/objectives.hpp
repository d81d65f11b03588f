#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vwapforge/allocation/model.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/numerics/tape.hpp"

namespace vwapforge {

enum class LossKind { absolute_vwap, quadratic_vwap, volume_curve };

inline std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::absolute_vwap: return "absolute";
        case LossKind::quadratic_vwap: return "quadratic";
        case LossKind::volume_curve: return "volume-curve";
    }
    return "?";
}

inline LossKind parse_loss(const std::string& s) {
    if (s == "absolute") return LossKind::absolute_vwap;
    if (s == "quadratic") return LossKind::quadratic_vwap;
    if (s == "volume-curve") return LossKind::volume_curve;
    throw ConfigError("unknown loss '" + s + "' (expected absolute, quadratic or volume-curve)");
}

inline double market_vwap(std::span<const double> prices, std::span<const double> volume_fractions) {
    double m = 0.0;
    for (std::size_t t = 0; t < prices.size(); ++t) m += prices[t] * volume_fractions[t];
    return m;
}

/// Relative signed slippage of executing curve v against the market volume
/// fractions: (sum P v - sum P V~) / sum P V~.
inline double slippage(std::span<const double> prices, std::span<const double> v,
                       std::span<const double> volume_fractions) {
    if (prices.size() != v.size() || prices.size() != volume_fractions.size() || prices.empty()) {
        throw ShapeError("slippage: prices, allocation and volume fractions must share a non-zero length");
    }
    const double mvwap = market_vwap(prices, volume_fractions);
    if (!(mvwap > 0.0)) throw DataError("slippage: market VWAP must be positive");
    double exec = 0.0;
    for (std::size_t t = 0; t < prices.size(); ++t) exec += prices[t] * v[t];
    return (exec - mvwap) / mvwap;
}

/// One evaluation window: horizon prices, executed curve, market fractions.
struct WindowOutcome {
    std::span<const double> prices;
    std::span<const double> allocation;
    std::span<const double> volume_fractions;
};

inline double volume_curve_error(std::span<const double> v, std::span<const double> fractions) {
    double s = 0.0;
    for (std::size_t t = 0; t < v.size(); ++t) s += (v[t] - fractions[t]) * (v[t] - fractions[t]);
    return s / static_cast<double>(v.size());
}

/// Mean per-window loss over a batch.
inline double loss(LossKind kind, std::span<const WindowOutcome> batch) {
    if (batch.empty()) throw DataError("loss: empty batch");
    double total = 0.0;
    for (const auto& w : batch) {
        double total_fraction = 0.0;
        for (double f : w.volume_fractions) total_fraction += f;
        if (!(total_fraction > 0.0)) throw DegenerateWindow("loss: window without market volume in batch");
        switch (kind) {
            case LossKind::absolute_vwap: total += std::fabs(slippage(w.prices, w.allocation, w.volume_fractions)); break;
            case LossKind::quadratic_vwap: {
                const double s = slippage(w.prices, w.allocation, w.volume_fractions);
                total += s * s;
                break;
            }
            case LossKind::volume_curve: total += volume_curve_error(w.allocation, w.volume_fractions); break;
        }
    }
    return total / static_cast<double>(batch.size());
}

/// Differentiable batch loss. curve is batch x h; prices and fractions are
/// batch x h constants.
inline Var loss_on_tape(Tape& t, LossKind kind, Var curve, const Tensor& prices, const Tensor& fractions) {
    const std::size_t batch = curve.rows(), h = curve.cols();
    if (prices.rows() != batch || prices.cols() != h || fractions.rows() != batch || fractions.cols() != h) {
        throw ShapeError("loss_on_tape: targets must match the curve shape");
    }
    if (kind == LossKind::volume_curve) return mean(square(sub(curve, t.constant(fractions))));
    // s = sum(P v) / mvwap - 1, with the price row pre-divided by the window VWAP.
    Tensor scaled = prices;
    for (std::size_t r = 0; r < batch; ++r) {
        const double mvwap = market_vwap(std::span(prices.values().data() + r * h, h),
                                         std::span(fractions.values().data() + r * h, h));
        if (!(mvwap > 0.0)) throw DegenerateWindow("loss_on_tape: window without market volume in batch");
        for (std::size_t k = 0; k < h; ++k) scaled[r * h + k] = prices[r * h + k] / mvwap;
    }
    Var s = add_scalar(row_sum(mul(curve, t.constant(std::move(scaled)))), -1.0);
    return kind == LossKind::absolute_vwap ? mean(abs(s)) : mean(square(s));
}

/// R^2 of the volume curve against the uniform baseline:
/// 1 - sum (v - V~)^2 / sum (V~ - 1/h)^2 over all windows and steps.
inline double r2_volume_curve(std::span<const std::vector<double>> predictions,
                              std::span<const std::vector<double>> targets) {
    if (predictions.size() != targets.size() || predictions.empty()) {
        throw ShapeError("r2_volume_curve: need matching, non-empty prediction and target sets");
    }
    double resid = 0.0, base = 0.0;
    for (std::size_t w = 0; w < predictions.size(); ++w) {
        const auto& v = predictions[w];
        const auto& y = targets[w];
        if (v.size() != y.size() || v.empty()) throw ShapeError("r2_volume_curve: window length mismatch");
        const double uniform = 1.0 / static_cast<double>(y.size());
        for (std::size_t k = 0; k < y.size(); ++k) {
            resid += (v[k] - y[k]) * (v[k] - y[k]);
            base += (y[k] - uniform) * (y[k] - uniform);
        }
    }
    if (!(base > 0.0)) throw DataError("r2_volume_curve: every target curve is uniform (zero denominator)");
    return 1.0 - resid / base;
}

struct MetricSet {
    double abs_vwap_loss = 0.0;
    double quad_vwap_loss = 0.0;
    double r2_volume = 0.0;
    std::size_t n_windows = 0;
};

/// Both terms of the slippage bound, relative to the window VWAP:
/// price_term = sum |(P_t - VWAP) v_t| / VWAP, allocation_term = sum |v_t - V~_t|.
struct SlippageBound {
    double price_term = 0.0;
    double allocation_term = 0.0;
};

inline SlippageBound slippage_bound(std::span<const double> prices, std::span<const double> v,
                                    std::span<const double> fractions) {
    const double mvwap = market_vwap(prices, fractions);
    if (!(mvwap > 0.0)) throw DataError("slippage_bound: market VWAP must be positive");
    SlippageBound b;
    for (std::size_t t = 0; t < prices.size(); ++t) {
        b.price_term += std::fabs((prices[t] - mvwap) * v[t]) / mvwap;
        b.allocation_term += std::fabs(mvwap * (v[t] - fractions[t])) / mvwap;
    }
    return b;
}

struct WindowRecord {
    std::int64_t window_end_time = 0;
    double signed_slippage = 0.0;
    double abs_slippage = 0.0;
    double abs_slippage_minus_naive = 0.0;
    SlippageBound bound;
};

/// Per-step distribution of executed and market fractions across windows.
struct StepStats {
    double mean = 0.0, stddev = 0.0, p10 = 0.0, p50 = 0.0, p90 = 0.0;
    double market_mean = 0.0;
};

struct Evaluation {
    MetricSet metrics;
    std::vector<WindowRecord> windows;
    std::vector<std::vector<double>> allocations;
    std::vector<StepStats> steps;
};

namespace detail {
inline double quantile(std::vector<double> xs, double q) {
    std::sort(xs.begin(), xs.end());
    const double pos = q * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}
} // namespace detail

/// Metrics from already computed allocations (one curve per sample).
inline Evaluation evaluate_allocations(const std::vector<WindowSample>& samples,
                                       std::vector<std::vector<double>> allocations) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    if (allocations.size() != samples.size()) throw ShapeError("evaluate: one allocation per sample required");
    Evaluation ev;
    const std::size_t h = samples.front().target_prices.size();
    const std::vector<double> uniform = naive_allocate(h);
    std::vector<std::vector<double>> targets;
    targets.reserve(samples.size());
    double abs_sum = 0.0, quad_sum = 0.0;
    for (std::size_t w = 0; w < samples.size(); ++w) {
        const WindowSample& s = samples[w];
        const double slip = slippage(s.target_prices, allocations[w], s.target_volume_fractions);
        const double naive = slippage(s.target_prices, uniform, s.target_volume_fractions);
        WindowRecord rec;
        rec.window_end_time = s.end_time;
        rec.signed_slippage = slip;
        rec.abs_slippage = std::fabs(slip);
        rec.abs_slippage_minus_naive = std::fabs(slip) - std::fabs(naive);
        rec.bound = slippage_bound(s.target_prices, allocations[w], s.target_volume_fractions);
        ev.windows.push_back(rec);
        abs_sum += std::fabs(slip);
        quad_sum += slip * slip;
        targets.push_back(s.target_volume_fractions);
    }
    const double n = static_cast<double>(samples.size());
    ev.metrics.abs_vwap_loss = abs_sum / n;
    ev.metrics.quad_vwap_loss = quad_sum / n;
    ev.metrics.r2_volume = r2_volume_curve(allocations, targets);
    ev.metrics.n_windows = samples.size();

    ev.steps.resize(h);
    for (std::size_t k = 0; k < h; ++k) {
        std::vector<double> col(samples.size());
        double m = 0.0, mk = 0.0;
        for (std::size_t w = 0; w < samples.size(); ++w) {
            col[w] = allocations[w][k];
            m += col[w];
            mk += samples[w].target_volume_fractions[k];
        }
        m /= n;
        double var = 0.0;
        for (double x : col) var += (x - m) * (x - m);
        StepStats& st = ev.steps[k];
        st.mean = m;
        st.stddev = std::sqrt(var / n);
        st.p10 = detail::quantile(col, 0.10);
        st.p50 = detail::quantile(col, 0.50);
        st.p90 = detail::quantile(col, 0.90);
        st.market_mean = mk / n;
    }
    ev.allocations = std::move(allocations);
    return ev;
}

/// Runs the model over every sample (in batches) and scores it.
inline Evaluation evaluate(const ModelSpec& spec, const ParamStore& params, const std::vector<WindowSample>& samples,
                           std::size_t batch_size = 256) {
    if (samples.empty()) throw DataError("evaluate: empty dataset");
    std::vector<std::vector<double>> allocations;
    allocations.reserve(samples.size());
    for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
        const std::size_t end = std::min(samples.size(), begin + batch_size);
        std::vector<std::span<const double>> windows;
        for (std::size_t i = begin; i < end; ++i) windows.push_back(samples[i].features());
        const Tensor curves = allocate_batch(spec, params, windows);
        const std::size_t h = curves.cols();
        for (std::size_t r = 0; r < end - begin; ++r) {
            allocations.emplace_back(curves.values().begin() + static_cast<std::ptrdiff_t>(r * h),
                                     curves.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * h));
        }
    }
    return evaluate_allocations(samples, std::move(allocations));
}

/// Fixed-point text of value * scale with eight decimals, the reporting
/// convention for abs (x1e2) and quadratic (x1e4) VWAP losses.
inline std::string format_scaled(double value, double scale) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.8f", value * scale);
    return buf;
}

inline void write_slippage_csv(std::ostream& out, const Evaluation& ev) {
    out << "window_end_time,signed_slippage,abs_slippage,abs_slippage_minus_naive\n";
    for (const auto& w : ev.windows) {
        out << w.window_end_time << ',' << csv::format_double(w.signed_slippage) << ','
            << csv::format_double(w.abs_slippage) << ',' << csv::format_double(w.abs_slippage_minus_naive) << '\n';
    }
}

inline void write_allocation_stats_csv(std::ostream& out, const Evaluation& ev) {
    out << "step,mean,std,p10,p50,p90,market_mean\n";
    for (std::size_t k = 0; k < ev.steps.size(); ++k) {
        const auto& s = ev.steps[k];
        out << (k + 1) << ',' << csv::format_double(s.mean) << ',' << csv::format_double(s.stddev) << ','
            << csv::format_double(s.p10) << ',' << csv::format_double(s.p50) << ',' << csv::format_double(s.p90)
            << ',' << csv::format_double(s.market_mean) << '\n';
    }
}

inline void write_slippage_bound_csv(std::ostream& out, const Evaluation& ev) {
    out << "window_end_time,abs_slippage,price_term,allocation_term\n";
    for (const auto& w : ev.windows) {
        out << w.window_end_time << ',' << csv::format_double(w.abs_slippage) << ','
            << csv::format_double(w.bound.price_term) << ',' << csv::format_double(w.bound.allocation_term) << '\n';
    }
}

} // namespace vwapforge
