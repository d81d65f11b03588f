#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "vwapforge/market_data/bar.hpp"
#include "vwapforge/numerics/rng.hpp"

namespace vwapforge {

/// Parameters of the synthetic hourly market.
///
/// Volume is base_volume * hour_season * dow_season * exp(z - sigma^2/2)
/// where z is a stationary AR(1) with marginal standard deviation
/// volume_noise and lag-one coefficient volume_persistence. Log returns are
/// Gaussian with standard deviation price_volatility scaled by
/// exp(coupling * (z - sigma^2/2) / 2), so busy hours are also volatile.
struct SynthSpec {
    double hour_amplitude = 0.5;
    double dow_amplitude = 0.2;
    double volume_noise = 0.35;
    double volume_persistence = 0.6;
    double price_volatility = 0.005;
    double volatility_coupling = 0.5;
    double base_volume = 1000.0;
    double start_price = 30000.0;
    std::int64_t start_time = 1'577'836'800'000;  // 2020-01-01T00:00:00Z
    std::string asset = "SYNTH";

    void validate() const {
        if (!(volume_noise > 0.0)) throw DataError("synth: volume_noise must be positive");
        if (!(price_volatility > 0.0)) throw DataError("synth: price_volatility must be positive");
        if (!(base_volume > 0.0) || !(start_price > 0.0)) throw DataError("synth: base volume and price must be positive");
        if (hour_amplitude < 0.0 || hour_amplitude >= 1.0) throw DataError("synth: hour_amplitude must be in [0, 1)");
        if (dow_amplitude < 0.0 || dow_amplitude >= 1.0) throw DataError("synth: dow_amplitude must be in [0, 1)");
        if (volume_persistence < 0.0 || volume_persistence >= 1.0) {
            throw DataError("synth: volume_persistence must be in [0, 1)");
        }
        if (start_time % kHourMs != 0) throw DataError("synth: start_time must be on an hour boundary");
    }
};

inline int utc_hour(std::int64_t ms) {
    const std::int64_t hours = ms >= 0 ? ms / kHourMs : (ms - kHourMs + 1) / kHourMs;
    return static_cast<int>(((hours % 24) + 24) % 24);
}

/// Day of week with Monday = 0 (1970-01-01 was a Thursday).
inline int utc_weekday(std::int64_t ms) {
    const std::int64_t day_ms = 24 * kHourMs;
    const std::int64_t days = ms >= 0 ? ms / day_ms : (ms - day_ms + 1) / day_ms;
    return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

/// Deterministic hour-of-day volume multiplier (peaks at 14:00 UTC).
inline double hour_season(const SynthSpec& spec, int hour) {
    return 1.0 + spec.hour_amplitude * std::sin(2.0 * std::numbers::pi * (hour - 8) / 24.0);
}

inline double weekday_season(const SynthSpec& spec, int weekday) {
    return 1.0 + spec.dow_amplitude * std::cos(2.0 * std::numbers::pi * (weekday - 2) / 7.0);
}

inline BarSeries generate_synthetic(const SynthSpec& spec, std::size_t n_bars, std::uint64_t seed) {
    spec.validate();
    if (n_bars < 1000) throw DataError("synth: need at least 1000 bars, got " + std::to_string(n_bars));
    Rng rng(seed);
    BarSeries series;
    series.asset = spec.asset;
    series.interval_ms = kHourMs;
    series.bars.reserve(n_bars);

    const double sigma = spec.volume_noise;
    const double phi = spec.volume_persistence;
    const double innovation = std::sqrt(1.0 - phi * phi) * sigma;
    double z = sigma * rng.normal();
    double price = spec.start_price;
    for (std::size_t i = 0; i < n_bars; ++i) {
        if (i > 0) z = phi * z + innovation * rng.normal();
        const std::int64_t t = spec.start_time + static_cast<std::int64_t>(i) * kHourMs;
        const double season = hour_season(spec, utc_hour(t)) * weekday_season(spec, utc_weekday(t));
        const double shock = z - 0.5 * sigma * sigma;
        const double volume = spec.base_volume * season * std::exp(shock);
        const double vol = spec.price_volatility * std::exp(0.5 * spec.volatility_coupling * shock);
        const double ret = vol * rng.normal();
        const double split = rng.uniform(0.3, 0.7);
        const double wick_up = std::fabs(rng.normal()) * 0.5 * vol;
        const double wick_down = std::fabs(rng.normal()) * 0.5 * vol;

        Bar b;
        b.open_time = t;
        b.open = price;
        b.close = price * std::exp(ret);
        b.bin_vwap = price * std::exp(ret * split);
        b.high = std::max(b.open, b.close) * std::exp(wick_up);
        b.low = std::min(b.open, b.close) * std::exp(-wick_down);
        b.volume = volume;
        b.quote_volume = volume * b.bin_vwap;
        b.inactive = false;
        series.bars.push_back(b);
        price = b.close;
    }
    validate_series(series);
    return series;
}

} // namespace vwapforge
