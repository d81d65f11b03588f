#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "vwapforge/market_data/bar.hpp"
#include "vwapforge/market_data/csv.hpp"
#include "vwapforge/market_data/split.hpp"
#include "vwapforge/market_data/synthetic.hpp"
#include "vwapforge/numerics/tensor.hpp"

namespace vwapforge {

/// Per-bar feature columns, in order.
inline constexpr std::size_t kFeatureCount = 6;
inline constexpr const char* kFeatureNames[kFeatureCount] = {"volume_norm", "hour_sin", "hour_cos",
                                                             "dow_sin",     "dow_cos",  "return"};

struct FeatureConfig {
    std::size_t lookback = 120;
    std::size_t horizon = 12;
    std::size_t rolling_window = 336;

    /// The rolling volume mean for bar t ends at bar t - shift().
    std::size_t shift() const { return lookback + horizon; }
    std::size_t sequence_length() const { return lookback + horizon - 1; }
    /// Bars spanned by one window: lookback rows plus the full horizon.
    std::size_t window_span() const { return lookback + horizon; }
    /// First bar index whose normalized-volume feature is defined.
    std::size_t first_feature_bar() const { return rolling_window - 1 + shift(); }
    /// Shortest series yielding one window.
    std::size_t minimum_bars() const { return first_feature_bar() + window_span(); }

    void validate() const {
        if (lookback < 1) throw ConfigError("features: lookback must be >= 1");
        if (horizon < 2) throw ConfigError("features: horizon must be >= 2");
        if (rolling_window < 1) throw ConfigError("features: rolling_window must be >= 1");
    }
};

struct WindowTargets {
    std::vector<double> prices;
    std::vector<double> volume_fractions;
};

/// Per-bar feature matrix (n x 6). Rows before first_valid have an
/// undefined volume feature and must not be used.
struct FeatureTable {
    std::vector<std::int64_t> open_time;
    std::vector<double> values;
    std::size_t first_valid = 0;

    std::size_t rows() const { return open_time.size(); }
    const double* row(std::size_t t) const { return values.data() + t * kFeatureCount; }
};

/// One supervised example. The (lookback + horizon - 1) x 6 feature matrix
/// is a view into the shared per-bar table: rows 0..lookback-1 are history,
/// the remaining rows are the first horizon-1 execution bars. Targets cover
/// all horizon bars.
struct WindowSample {
    std::shared_ptr<const FeatureTable> table;
    std::size_t window_id = 0;   // index of the window's first bar in the source series
    std::size_t rows = 0;        // lookback + horizon - 1
    std::vector<double> target_prices;
    std::vector<double> target_volume_fractions;
    std::int64_t end_time = 0;   // open_time of the last horizon bar

    std::span<const double> features() const {
        return {table->row(window_id), rows * kFeatureCount};
    }
    Tensor feature_matrix() const {
        auto f = features();
        return Tensor({rows, kFeatureCount}, std::vector<double>(f.begin(), f.end()));
    }
};

/// Feature row of bar t. Uses bars <= t only.
///   volume_norm = V_t / mean(V over rolling_window bars ending at t - shift)
///                 (0 when that mean is 0)
///   hour/dow    = sin/cos of 2*pi*hour/24 and 2*pi*weekday/7 (UTC, Monday = 0)
///   return      = P_t / P_{t-1} - 1 on bin VWAP, 0 for inactive bars
inline void feature_row(const BarSeries& series, std::size_t t, const FeatureConfig& cfg, double* out) {
    const Bar& b = series.bars[t];
    const std::size_t end = t - cfg.shift();  // inclusive
    const std::size_t begin = end + 1 - cfg.rolling_window;
    double total = 0.0;
    for (std::size_t k = begin; k <= end; ++k) total += series.bars[k].volume;
    const double mean_volume = total / static_cast<double>(cfg.rolling_window);
    out[0] = mean_volume > 0.0 ? b.volume / mean_volume : 0.0;

    const double hour_angle = 2.0 * std::numbers::pi * utc_hour(b.open_time) / 24.0;
    const double dow_angle = 2.0 * std::numbers::pi * utc_weekday(b.open_time) / 7.0;
    out[1] = std::sin(hour_angle);
    out[2] = std::cos(hour_angle);
    out[3] = std::sin(dow_angle);
    out[4] = std::cos(dow_angle);
    out[5] = (b.inactive || t == 0) ? 0.0 : b.bin_vwap / series.bars[t - 1].bin_vwap - 1.0;
}

inline FeatureTable compute_feature_table(const BarSeries& series, const FeatureConfig& cfg) {
    cfg.validate();
    FeatureTable table;
    const std::size_t n = series.size();
    table.first_valid = cfg.first_feature_bar();
    table.open_time.resize(n);
    table.values.assign(n * kFeatureCount, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        table.open_time[t] = series.bars[t].open_time;
        if (t >= table.first_valid) feature_row(series, t, cfg, table.values.data() + t * kFeatureCount);
    }
    return table;
}

/// Horizon prices and market volume fractions V_t / sum(V) of the window
/// starting at bar window_id. Throws DegenerateWindow when the horizon has
/// no volume.
inline WindowTargets targets_for_window(const BarSeries& series, std::size_t window_id, const FeatureConfig& cfg) {
    if (window_id + cfg.window_span() > series.size()) {
        throw DataError("targets: window " + std::to_string(window_id) + " extends past the end of the series");
    }
    WindowTargets out;
    out.prices.resize(cfg.horizon);
    out.volume_fractions.resize(cfg.horizon);
    const std::size_t first = window_id + cfg.lookback;
    double total = 0.0;
    for (std::size_t k = 0; k < cfg.horizon; ++k) total += series.bars[first + k].volume;
    if (!(total > 0.0)) {
        throw DegenerateWindow("targets: window " + std::to_string(window_id) + " has zero horizon volume");
    }
    for (std::size_t k = 0; k < cfg.horizon; ++k) {
        const Bar& b = series.bars[first + k];
        out.prices[k] = b.bin_vwap;
        out.volume_fractions[k] = b.volume / total;
    }
    return out;
}

struct FeatureSet {
    FeatureConfig config;
    std::vector<WindowSample> samples;
    std::size_t degenerate_dropped = 0;
};

inline void require_feature_history(const BarSeries& series, const FeatureConfig& cfg) {
    cfg.validate();
    if (series.size() < cfg.minimum_bars()) {
        throw DataError("features: series has " + std::to_string(series.size()) + " bars, need at least " +
                        std::to_string(cfg.minimum_bars()) + " (rolling window " + std::to_string(cfg.rolling_window) +
                        " + 2 x (lookback + horizon) - 1)");
    }
}

/// Builds every stride-1 window whose bars lie in [begin, end) of the series
/// and whose features are defined. Degenerate windows are dropped and counted.
inline FeatureSet build_features(const BarSeries& series, const FeatureConfig& cfg,
                                 const std::shared_ptr<const FeatureTable>& table, std::size_t begin,
                                 std::size_t end) {
    require_feature_history(series, cfg);
    end = std::min(end, series.size());
    FeatureSet set;
    set.config = cfg;
    const std::size_t seq = cfg.sequence_length();
    const std::size_t first = std::max(begin, table->first_valid);
    for (std::size_t s = first; s + cfg.window_span() <= end; ++s) {
        WindowTargets targets;
        try {
            targets = targets_for_window(series, s, cfg);
        } catch (const DegenerateWindow&) {
            ++set.degenerate_dropped;
            continue;
        }
        WindowSample w;
        w.table = table;
        w.rows = seq;
        w.target_prices = std::move(targets.prices);
        w.target_volume_fractions = std::move(targets.volume_fractions);
        w.window_id = s;
        w.end_time = series.bars[s + cfg.window_span() - 1].open_time;
        set.samples.push_back(std::move(w));
    }
    return set;
}

inline FeatureSet build_features(const BarSeries& series, const FeatureConfig& cfg) {
    require_feature_history(series, cfg);
    auto table = std::make_shared<const FeatureTable>(compute_feature_table(series, cfg));
    return build_features(series, cfg, table, 0, series.size());
}

/// Windows of the three chronological partitions. Features are computed on
/// the whole series (they are causal); a window is assigned to a partition
/// only if all of its bars fall inside it, so no target is shared.
struct PartitionedFeatures {
    FeatureSet train, validation, test;
    SplitBounds bounds;
};

inline PartitionedFeatures build_partitioned_features(const BarSeries& series, const FeatureConfig& cfg,
                                                      const SplitSpec& split_spec = {}) {
    PartitionedFeatures out;
    require_feature_history(series, cfg);
    out.bounds = split_bounds(series.size(), split_spec, cfg.window_span());
    auto table = std::make_shared<const FeatureTable>(compute_feature_table(series, cfg));
    out.train = build_features(series, cfg, table, out.bounds.train_begin, out.bounds.train_end);
    out.validation = build_features(series, cfg, table, out.bounds.validation_begin, out.bounds.validation_end);
    out.test = build_features(series, cfg, table, out.bounds.test_begin, out.bounds.test_end);
    return out;
}

/// Debug dump: open_time followed by the six feature columns, rows from
/// first_valid onwards.
inline void write_feature_csv(std::ostream& out, const FeatureTable& table) {
    out << "open_time";
    for (const char* name : kFeatureNames) out << ',' << name;
    out << '\n';
    for (std::size_t t = table.first_valid; t < table.rows(); ++t) {
        out << table.open_time[t];
        for (std::size_t k = 0; k < kFeatureCount; ++k) out << ',' << csv::format_double(table.row(t)[k]);
        out << '\n';
    }
}

} // namespace vwapforge
