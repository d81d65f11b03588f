#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "vwapforge/market_data/bar.hpp"

namespace vwapforge {

struct SplitSpec {
    double test_fraction = 0.20;
    double validation_fraction_of_remainder = 0.20;
};

/// Half-open bar index ranges of the three chronological partitions.
struct SplitBounds {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t validation_begin = 0, validation_end = 0;
    std::size_t test_begin = 0, test_end = 0;

    std::size_t train_size() const { return train_end - train_begin; }
    std::size_t validation_size() const { return validation_end - validation_begin; }
    std::size_t test_size() const { return test_end - test_begin; }
};

struct SplitResult {
    BarSeries train, validation, test;
    SplitBounds bounds;
};

namespace detail {
inline std::size_t fraction_of(std::size_t n, double frac) {
    // The epsilon absorbs representation error such as 0.2 * 1000 = 200.00000000000003.
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9));
}
} // namespace detail

/// Test is the last test_fraction of bars, validation the last
/// validation_fraction_of_remainder of what precedes it, train the rest.
/// Each partition must hold at least min_partition bars.
inline SplitBounds split_bounds(std::size_t n, const SplitSpec& spec, std::size_t min_partition) {
    if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) ||
        !(spec.validation_fraction_of_remainder > 0.0 && spec.validation_fraction_of_remainder < 1.0)) {
        throw DataError("split: fractions must lie in (0, 1)");
    }
    SplitBounds b;
    const std::size_t n_test = detail::fraction_of(n, spec.test_fraction);
    const std::size_t rest = n - n_test;
    const std::size_t n_val = detail::fraction_of(rest, spec.validation_fraction_of_remainder);
    b.train_begin = 0;
    b.train_end = rest - n_val;
    b.validation_begin = b.train_end;
    b.validation_end = rest;
    b.test_begin = rest;
    b.test_end = n;
    const std::size_t smallest = std::min({b.train_size(), b.validation_size(), b.test_size()});
    if (smallest < min_partition || smallest == 0) {
        // Smallest partition is the validation share of the remainder.
        const double share = (1.0 - spec.test_fraction) * spec.validation_fraction_of_remainder;
        const std::size_t needed = static_cast<std::size_t>(
            std::ceil(static_cast<double>(std::max<std::size_t>(min_partition, 1)) / std::min(share, spec.test_fraction)));
        throw DataError("split: series of " + std::to_string(n) + " bars is too short; each partition needs at least " +
                        std::to_string(min_partition) + " bars (about " + std::to_string(needed) + " bars in total)");
    }
    return b;
}

inline SplitResult split(const BarSeries& series, const SplitSpec& spec, std::size_t min_partition) {
    SplitResult r;
    r.bounds = split_bounds(series.size(), spec, min_partition);
    auto slice = [&](std::size_t begin, std::size_t end) {
        BarSeries s;
        s.asset = series.asset;
        s.interval_ms = series.interval_ms;
        s.bars.assign(series.bars.begin() + static_cast<std::ptrdiff_t>(begin),
                      series.bars.begin() + static_cast<std::ptrdiff_t>(end));
        return s;
    };
    r.train = slice(r.bounds.train_begin, r.bounds.train_end);
    r.validation = slice(r.bounds.validation_begin, r.bounds.validation_end);
    r.test = slice(r.bounds.test_begin, r.bounds.test_end);
    return r;
}

} // namespace vwapforge
