#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vwapforge/error.hpp"

namespace vwapforge {

inline constexpr std::int64_t kHourMs = 3'600'000;

/// One market interval. bin_vwap is the interval's volume-weighted price;
/// inactive bars (volume == 0) carry the previous bar's bin_vwap forward.
struct Bar {
    std::int64_t open_time = 0;  // UTC milliseconds
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double volume = 0.0;
    double quote_volume = 0.0;
    double bin_vwap = 0.0;
    bool inactive = false;

    bool operator==(const Bar&) const = default;
};

struct BarSeries {
    std::string asset;
    std::int64_t interval_ms = kHourMs;
    std::vector<Bar> bars;

    std::size_t size() const noexcept { return bars.size(); }
    bool empty() const noexcept { return bars.empty(); }
    const Bar& operator[](std::size_t i) const { return bars[i]; }

    bool operator==(const BarSeries&) const = default;
};

/// Checks every BarSeries invariant; throws DataError naming the first bad row.
inline void validate_series(const BarSeries& s) {
    if (s.interval_ms <= 0) throw DataError("bar series: interval must be positive");
    for (std::size_t i = 0; i < s.bars.size(); ++i) {
        const Bar& b = s.bars[i];
        const std::string where = "bar series " + s.asset + " row " + std::to_string(i);
        for (double v : {b.open, b.high, b.low, b.close, b.volume, b.quote_volume, b.bin_vwap}) {
            if (!std::isfinite(v)) throw DataError(where + ": non-finite field");
        }
        if (b.volume < 0.0 || b.quote_volume < 0.0) throw DataError(where + ": negative volume");
        if (!(b.bin_vwap > 0.0)) throw DataError(where + ": bin_vwap must be positive");
        if (b.inactive != (b.volume == 0.0)) throw DataError(where + ": inactive flag disagrees with volume");
        if (b.volume > 0.0) {
            const double lo = std::min(b.open, b.close), hi = std::max(b.open, b.close);
            if (!(b.low <= lo && hi <= b.high)) throw DataError(where + ": OHLC ordering violated");
        }
        if (i > 0) {
            const std::int64_t step = b.open_time - s.bars[i - 1].open_time;
            if (step <= 0) throw DataError(where + ": timestamps not strictly increasing");
            if (step != s.interval_ms) throw DataError(where + ": spacing " + std::to_string(step) + " ms, expected " +
                                                       std::to_string(s.interval_ms));
            if (b.inactive && b.bin_vwap != s.bars[i - 1].bin_vwap) {
                throw DataError(where + ": inactive bar must carry the previous bin_vwap");
            }
        }
    }
}

/// bin_vwap from quote/base volume, or carried forward for empty bars.
/// Without a previous price, an empty leading bar falls back to its close.
inline void derive_bin_vwap(Bar& bar, const Bar* previous) {
    if (bar.volume > 0.0) {
        bar.bin_vwap = bar.quote_volume / bar.volume;
        bar.inactive = false;
    } else {
        bar.inactive = true;
        bar.bin_vwap = previous ? previous->bin_vwap : bar.close;
    }
}

/// Zero-volume placeholder for a missing interval: flat at the previous close.
inline Bar gap_bar(const Bar& previous, std::int64_t open_time) {
    Bar b;
    b.open_time = open_time;
    b.open = b.high = b.low = b.close = previous.close;
    b.volume = 0.0;
    b.quote_volume = 0.0;
    b.bin_vwap = previous.bin_vwap;
    b.inactive = true;
    return b;
}

/// Orders-preserving regularization: rejects non-increasing timestamps or
/// off-grid spacing, and inserts zero-volume bars into missing intervals.
inline std::vector<Bar> fill_gaps(const std::vector<Bar>& bars, std::int64_t interval_ms) {
    std::vector<Bar> out;
    out.reserve(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        if (!out.empty()) {
            const std::int64_t step = bars[i].open_time - out.back().open_time;
            if (step <= 0) throw DataError("row " + std::to_string(i) + ": timestamps not strictly increasing");
            if (step % interval_ms != 0) {
                throw DataError("row " + std::to_string(i) + ": timestamp off the " + std::to_string(interval_ms) +
                                " ms grid");
            }
            while (bars[i].open_time - out.back().open_time > interval_ms) {
                out.push_back(gap_bar(out.back(), out.back().open_time + interval_ms));
            }
        }
        out.push_back(bars[i]);
    }
    return out;
}

} // namespace vwapforge
