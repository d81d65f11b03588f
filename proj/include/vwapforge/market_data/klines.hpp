#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vwapforge/market_data/bar.hpp"

namespace vwapforge {

/// Exchange klines REST client settings. Column order of one kline row:
/// [open_time, open, high, low, close, volume, close_time, quote_volume,
///  trade_count, taker_buy_base, taker_buy_quote, ignore]
struct KlinesConfig {
    std::string endpoint = "https://fapi.binance.com";
    std::string path = "/fapi/v1/klines";
    std::string interval = "1h";
    std::int64_t interval_ms = kHourMs;
    int page_limit = 1000;
    int rate_limit_ms = 250;
    int max_retries = 5;
    int backoff_base_ms = 500;
    int backoff_cap_ms = 30'000;
    int timeout_s = 30;
};

struct HttpResult {
    int status = 0;  // 0 means transport failure
    std::string body;
    std::string error;
};

/// GET of a path-with-query against the configured endpoint.
using HttpGet = std::function<HttpResult(const std::string& path_and_query)>;
using Sleeper = std::function<void(int milliseconds)>;

inline HttpGet make_http_get(const KlinesConfig& cfg) {
    return [cfg](const std::string& target) {
        httplib::Client client(cfg.endpoint);
        client.set_connection_timeout(cfg.timeout_s, 0);
        client.set_read_timeout(cfg.timeout_s, 0);
        HttpResult r;
        if (auto res = client.Get(target)) {
            r.status = res->status;
            r.body = res->body;
        } else {
            r.error = httplib::to_string(res.error());
        }
        return r;
    };
}

inline Sleeper default_sleeper() {
    return [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

namespace detail {

inline double kline_number(const nlohmann::json& v, std::size_t row, const char* field) {
    try {
        if (v.is_string()) {
            std::size_t used = 0;
            const std::string s = v.get<std::string>();
            const double d = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return d;
        }
        if (v.is_number()) return v.get<double>();
    } catch (const std::exception&) {
    }
    throw DataError("klines row " + std::to_string(row) + ": malformed " + field);
}

} // namespace detail

/// Parses one kline row; bin_vwap and inactive are left for regularize_klines.
inline Bar parse_kline_row(const nlohmann::json& row, std::size_t index) {
    if (!row.is_array() || row.size() < 8) {
        throw DataError("klines row " + std::to_string(index) + ": expected an array of at least 8 columns");
    }
    Bar b;
    if (!row[0].is_number_integer()) throw DataError("klines row " + std::to_string(index) + ": malformed open_time");
    b.open_time = row[0].get<std::int64_t>();
    b.open = detail::kline_number(row[1], index, "open");
    b.high = detail::kline_number(row[2], index, "high");
    b.low = detail::kline_number(row[3], index, "low");
    b.close = detail::kline_number(row[4], index, "close");
    b.volume = detail::kline_number(row[5], index, "volume");
    b.quote_volume = detail::kline_number(row[7], index, "quote_volume");
    if (b.volume < 0.0 || b.quote_volume < 0.0) {
        throw DataError("klines row " + std::to_string(index) + ": negative volume");
    }
    return b;
}

/// Parses a klines response body; row indices in errors are offset by
/// first_index so they are global across pages.
inline std::vector<Bar> parse_klines_page(const std::string& body, std::size_t first_index = 0) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("klines: response is not JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DataError("klines: response is not an array");
    std::vector<Bar> out;
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) out.push_back(parse_kline_row(doc[i], first_index + i));
    return out;
}

/// Turns raw rows into a regular series: bin_vwap = quote/base volume,
/// carried forward over empty bars; missing intervals become empty bars.
inline std::vector<Bar> regularize_klines(const std::vector<Bar>& raw, std::int64_t interval_ms) {
    std::vector<Bar> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Bar b = raw[i];
        if (!out.empty()) {
            const std::int64_t step = b.open_time - out.back().open_time;
            if (step <= 0) throw DataError("klines row " + std::to_string(i) + ": timestamps not strictly increasing");
            if (step % interval_ms != 0) throw DataError("klines row " + std::to_string(i) + ": off-grid timestamp");
            while (b.open_time - out.back().open_time > interval_ms) {
                out.push_back(gap_bar(out.back(), out.back().open_time + interval_ms));
            }
        }
        derive_bin_vwap(b, out.empty() ? nullptr : &out.back());
        out.push_back(b);
    }
    return out;
}

/// Fetches bars with open_time in [start_ms, end_ms), paging forward until
/// the range is covered or the endpoint returns an empty page. Failed
/// requests (transport errors, 429, 5xx) are retried with exponential
/// backoff capped at backoff_cap_ms; other statuses fail immediately.
inline BarSeries fetch_klines(const std::string& symbol, std::int64_t start_ms, std::int64_t end_ms,
                              const KlinesConfig& cfg, const HttpGet& get, const Sleeper& sleep) {
    if (symbol.empty()) throw DataError("klines: symbol is empty");
    if (end_ms <= start_ms) throw DataError("klines: end must be after start");
    std::vector<Bar> raw;
    std::int64_t cursor = start_ms;
    bool first_request = true;
    while (cursor < end_ms) {
        const std::string target = cfg.path + "?symbol=" + symbol + "&interval=" + cfg.interval +
                                   "&startTime=" + std::to_string(cursor) + "&endTime=" + std::to_string(end_ms - 1) +
                                   "&limit=" + std::to_string(cfg.page_limit);
        if (!first_request && cfg.rate_limit_ms > 0) sleep(cfg.rate_limit_ms);
        first_request = false;

        HttpResult res;
        int delay = cfg.backoff_base_ms;
        for (int attempt = 0;; ++attempt) {
            res = get(target);
            const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
            if (res.status == 200) break;
            if (!retryable || attempt >= cfg.max_retries) {
                throw DataError("klines: request failed after " + std::to_string(attempt + 1) + " attempt(s): " +
                                (res.status == 0 ? res.error : "HTTP " + std::to_string(res.status)));
            }
            sleep(delay);
            delay = std::min(delay * 2, cfg.backoff_cap_ms);
        }

        std::vector<Bar> page = parse_klines_page(res.body, raw.size());
        std::size_t added = 0;
        for (const Bar& b : page) {
            if (b.open_time < cursor || b.open_time >= end_ms) continue;
            if (!raw.empty() && b.open_time <= raw.back().open_time) continue;
            raw.push_back(b);
            ++added;
        }
        if (added == 0) break;
        cursor = raw.back().open_time + cfg.interval_ms;
    }
    if (raw.empty()) throw DataError("klines: no bars returned for " + symbol);

    BarSeries series;
    series.asset = symbol;
    series.interval_ms = cfg.interval_ms;
    series.bars = regularize_klines(raw, cfg.interval_ms);
    validate_series(series);
    return series;
}

inline BarSeries fetch_klines(const std::string& symbol, std::int64_t start_ms, std::int64_t end_ms,
                              const KlinesConfig& cfg) {
    return fetch_klines(symbol, start_ms, end_ms, cfg, make_http_get(cfg), default_sleeper());
}

/// Days since 1970-01-01 for a proleptic Gregorian date.
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Accepts integer milliseconds, YYYY-MM-DD, or YYYY-MM-DDTHH:MM[:SS] (UTC).
inline std::int64_t parse_utc_time(const std::string& text) {
    if (!text.empty() && text.find('-') == std::string::npos) {
        try {
            std::size_t used = 0;
            const long long v = std::stoll(text, &used);
            if (used == text.size()) return v;
        } catch (const std::exception&) {
        }
        throw DataError("cannot parse time '" + text + "'");
    }
    int y = 0, mo = 0, d = 0, hh = 0, mm = 0, ss = 0;
    char sep = 0;
    const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &hh, &mm, &ss);
    const bool ok = (n == 3) || ((n == 6 || n == 7) && (sep == 'T' || sep == ' '));
    if (!ok || mo < 1 || mo > 12 || d < 1 || d > 31 || hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 60) {
        throw DataError("cannot parse time '" + text + "'");
    }
    const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
    return ((days * 24 + hh) * 60 + mm) * 60'000 + static_cast<std::int64_t>(ss) * 1000;
}

} // namespace vwapforge
