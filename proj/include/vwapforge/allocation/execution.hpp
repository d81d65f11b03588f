#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "vwapforge/allocation/model.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/market_data/csv.hpp"

namespace vwapforge {

/// One released allocation of an execution order.
struct ExecutionFill {
    std::int64_t execution_start = 0;  // open_time of the first execution bar
    std::size_t step_index = 0;        // 1-based
    double fraction = 0.0;

    bool operator==(const ExecutionFill&) const = default;
};

/// Back-to-back orders: order k uses the window starting at bar
/// first_feature_bar + k*h and executes over its last h bars.
inline std::size_t execution_window(const FeatureConfig& cfg, std::size_t k) {
    return cfg.first_feature_bar() + k * cfg.horizon;
}

/// Incremental executor: bars arrive one at a time, and each arrival
/// releases the allocations that have just become decidable. Future
/// feature rows are zero-padded, so the output never depends on bars that
/// have not arrived.
class StreamingExecutor {
public:
    StreamingExecutor(ModelSpec spec, const ParamStore& params, FeatureConfig cfg)
        : spec_(std::move(spec)), params_(params), cfg_(cfg) {
        cfg_.validate();
        if (cfg_.lookback != spec_.lookback || cfg_.horizon != spec_.horizon) {
            throw ConfigError("execute: feature window does not match the model");
        }
        series_.interval_ms = kHourMs;
    }

    /// Appends a bar (missing intervals are filled first) and returns the
    /// newly released allocations.
    std::vector<ExecutionFill> push(const Bar& bar) {
        std::vector<ExecutionFill> out;
        if (!series_.bars.empty()) {
            const Bar& prev = series_.bars.back();
            if (bar.open_time <= prev.open_time) throw DataError("execute: timestamps must increase");
            if ((bar.open_time - prev.open_time) % series_.interval_ms != 0) {
                throw DataError("execute: timestamp off the hourly grid");
            }
            while (bar.open_time - series_.bars.back().open_time > series_.interval_ms) {
                append(gap_bar(series_.bars.back(), series_.bars.back().open_time + series_.interval_ms), out);
            }
        }
        append(bar, out);
        return out;
    }

    std::size_t bars_seen() const { return series_.bars.size(); }

private:
    void append(const Bar& bar, std::vector<ExecutionFill>& out) {
        BarSeries check;
        check.interval_ms = series_.interval_ms;
        if (!series_.bars.empty()) check.bars.push_back(series_.bars.back());
        check.bars.push_back(bar);
        validate_series(check);

        series_.bars.push_back(bar);
        const std::size_t b = series_.bars.size() - 1;
        rows_.resize(series_.bars.size() * kFeatureCount, 0.0);
        if (b >= cfg_.first_feature_bar()) feature_row(series_, b, cfg_, rows_.data() + b * kFeatureCount);

        const std::size_t first = cfg_.first_feature_bar();
        if (b + 1 < first + cfg_.lookback) return;
        // Active order: the one whose window covers b with t in [l, l+h-1].
        const std::size_t k = (b + 1 - first - cfg_.lookback) / cfg_.horizon;
        const std::size_t w = execution_window(cfg_, k);
        const std::size_t t = b - w + 1;
        if (t < cfg_.lookback || t > spec_.sequence_length()) return;
        if (k != order_) {
            order_ = k;
            released_ = 0;
        }
        const std::size_t decided = decided_count(spec_, t);
        if (decided <= released_) return;
        std::vector<double> window(spec_.sequence_length() * kFeatureCount, 0.0);
        std::copy_n(rows_.data() + w * kFeatureCount, t * kFeatureCount, window.data());
        const std::vector<double> v = deploy_step(spec_, params_, window, t);
        for (std::size_t i = released_; i < decided; ++i) out.push_back({start_time(w), i + 1, v[i]});
        released_ = decided;
    }

    std::int64_t start_time(std::size_t w) const {
        // The first execution bar may not have arrived yet; its time is fixed by the grid.
        return series_.bars[w].open_time + static_cast<std::int64_t>(cfg_.lookback) * series_.interval_ms;
    }

    ModelSpec spec_;
    const ParamStore& params_;
    FeatureConfig cfg_;
    BarSeries series_;
    std::vector<double> rows_;
    std::size_t order_ = static_cast<std::size_t>(-1);
    std::size_t released_ = 0;
};

/// Same orders computed from a complete series: fully observed windows use
/// the full-information forward pass, the trailing partial order uses the
/// zero-padded one.
inline std::vector<ExecutionFill> execute_batch(const ModelSpec& spec, const ParamStore& params,
                                                const BarSeries& series, const FeatureConfig& cfg) {
    cfg.validate();
    if (cfg.lookback != spec.lookback || cfg.horizon != spec.horizon) {
        throw ConfigError("execute: feature window does not match the model");
    }
    std::vector<ExecutionFill> out;
    const std::size_t n = series.size();
    if (n < cfg.first_feature_bar() + cfg.lookback) return out;
    const FeatureTable table = compute_feature_table(series, cfg);
    const std::size_t seq = spec.sequence_length();
    for (std::size_t k = 0;; ++k) {
        const std::size_t w = execution_window(cfg, k);
        if (w + cfg.lookback > n) break;
        const std::size_t t = std::min(seq, n - w);
        const std::int64_t start = series.bars[w].open_time + static_cast<std::int64_t>(cfg.lookback) * series.interval_ms;
        std::vector<double> v;
        std::size_t decided = 0;
        if (t == seq) {
            v = allocate(spec, params, std::span<const double>(table.row(w), seq * kFeatureCount));
            decided = spec.horizon;
        } else {
            std::vector<double> window(seq * kFeatureCount, 0.0);
            std::copy_n(table.row(w), t * kFeatureCount, window.data());
            v = deploy_step(spec, params, window, t);
            decided = v.size();
        }
        for (std::size_t i = 0; i < decided; ++i) out.push_back({start, i + 1, v[i]});
    }
    return out;
}

inline void write_fill_header(std::ostream& out) { out << "execution_start,step_index,fraction\n"; }

inline void write_fill(std::ostream& out, const ExecutionFill& f) {
    out << f.execution_start << ',' << f.step_index << ',' << csv::format_double(f.fraction) << '\n';
}

} // namespace vwapforge
