#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vwapforge/market_data/bar.hpp"

namespace vwapforge {

inline constexpr std::string_view kBarCsvHeader =
    "open_time,open,high,low,close,volume,quote_volume,bin_vwap,inactive";

namespace csv {

/// Splits one RFC-4180 record. Quoted fields may contain commas and doubled
/// quotes; embedded newlines are not supported.
inline std::vector<std::string> split_record(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted) throw DataError("unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

template <class T>
T parse_number(std::string_view text, const std::string& what) {
    T value{};
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || text.empty()) throw DataError(what + ": cannot parse '" + std::string(text) + "'");
    return value;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

} // namespace csv

/// Column positions of the bar schema within a header; reordered columns
/// are accepted, missing ones are not.
class BarCsvLayout {
public:
    explicit BarCsvLayout(const std::string& header_line) {
        std::string line = header_line;
        csv::strip_cr(line);
        const auto header = csv::split_record(line);
        width_ = header.size();
        const std::vector<std::string> required = csv::split_record(kBarCsvHeader);
        column_.resize(required.size());
        for (std::size_t k = 0; k < required.size(); ++k) {
            auto it = std::find(header.begin(), header.end(), required[k]);
            if (it == header.end()) throw DataError("bar csv: missing column '" + required[k] + "'");
            column_[k] = static_cast<std::size_t>(it - header.begin());
        }
    }

    /// Parses one data record; `row` only labels error messages.
    Bar parse(const std::string& record, std::size_t row) const {
        const std::string where = "bar csv row " + std::to_string(row);
        std::vector<std::string> f;
        try {
            f = csv::split_record(record);
        } catch (const DataError& e) {
            throw DataError(where + ": " + e.what());
        }
        if (f.size() != width_) {
            throw DataError(where + ": expected " + std::to_string(width_) + " fields, got " + std::to_string(f.size()));
        }
        Bar b;
        b.open_time = csv::parse_number<std::int64_t>(f[column_[0]], where + " open_time");
        b.open = csv::parse_number<double>(f[column_[1]], where + " open");
        b.high = csv::parse_number<double>(f[column_[2]], where + " high");
        b.low = csv::parse_number<double>(f[column_[3]], where + " low");
        b.close = csv::parse_number<double>(f[column_[4]], where + " close");
        b.volume = csv::parse_number<double>(f[column_[5]], where + " volume");
        b.quote_volume = csv::parse_number<double>(f[column_[6]], where + " quote_volume");
        b.bin_vwap = csv::parse_number<double>(f[column_[7]], where + " bin_vwap");
        const int flag = csv::parse_number<int>(f[column_[8]], where + " inactive");
        if (flag != 0 && flag != 1) throw DataError(where + ": inactive must be 0 or 1");
        b.inactive = flag == 1;
        return b;
    }

private:
    std::size_t width_ = 0;
    std::vector<std::size_t> column_;
};

/// Parses the bar CSV schema. Missing intervals are filled with zero-volume
/// bars before validation.
inline BarSeries read_bars_csv(std::istream& in, std::string asset = {}, std::int64_t interval_ms = kHourMs) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("bar csv: empty input (header required)");
    const BarCsvLayout layout(line);

    std::vector<Bar> bars;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        csv::strip_cr(line);
        if (line.empty()) continue;
        Bar b = layout.parse(line, row);
        if (!bars.empty() && b.open_time <= bars.back().open_time) {
            throw DataError("bar csv row " + std::to_string(row) + ": timestamp " + std::to_string(b.open_time) +
                            " not after previous " + std::to_string(bars.back().open_time));
        }
        bars.push_back(b);
        ++row;
    }

    BarSeries series;
    series.asset = std::move(asset);
    series.interval_ms = interval_ms;
    series.bars = fill_gaps(bars, interval_ms);
    validate_series(series);
    return series;
}

inline BarSeries read_bars_csv(const std::string& path, std::int64_t interval_ms = kHourMs) {
    std::ifstream in(path);
    if (!in) throw DataError("bar csv: cannot open " + path);
    std::string asset = path;
    if (auto slash = asset.find_last_of('/'); slash != std::string::npos) asset = asset.substr(slash + 1);
    if (auto dot = asset.rfind('.'); dot != std::string::npos) asset = asset.substr(0, dot);
    return read_bars_csv(in, asset, interval_ms);
}

inline void write_bars_csv(std::ostream& out, const BarSeries& series) {
    out << kBarCsvHeader << '\n';
    for (const Bar& b : series.bars) {
        out << b.open_time << ',' << csv::format_double(b.open) << ',' << csv::format_double(b.high) << ','
            << csv::format_double(b.low) << ',' << csv::format_double(b.close) << ',' << csv::format_double(b.volume)
            << ',' << csv::format_double(b.quote_volume) << ',' << csv::format_double(b.bin_vwap) << ','
            << (b.inactive ? 1 : 0) << '\n';
    }
}

inline void write_bars_csv(const std::string& path, const BarSeries& series) {
    std::ofstream out(path);
    if (!out) throw DataError("bar csv: cannot write " + path);
    write_bars_csv(out, series);
    if (!out) throw DataError("bar csv: write failed for " + path);
}

} // namespace vwapforge
