#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vwapforge/allocation/model.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/market_data/csv.hpp"
#include "vwapforge/market_data/klines.hpp"
#include "vwapforge/market_data/split.hpp"
#include "vwapforge/market_data/synthetic.hpp"
#include "vwapforge/training/config.hpp"

namespace vwapforge {

/// Everything a command can be configured with. Precedence: built-in
/// defaults, then the --config file, then explicit flags.
struct Settings {
    KlinesConfig klines;
    std::string symbol;
    std::string start;
    std::string end;

    SynthSpec synth;
    std::size_t synth_bars = 50'000;

    FeatureConfig features;
    SplitSpec split;
    ModelSpec sizes;
    TrainConfig train;
};

/// Reads `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; duplicate keys are an error.
inline std::map<std::string, std::string> parse_config_text(std::istream& in, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        csv::strip_cr(line);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.emplace(key, value).second) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

inline std::map<std::string, std::string> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config_text(in, path);
}

namespace detail {

template <class T>
T config_number(const std::string& key, const std::string& value) {
    try {
        return csv::parse_number<T>(value, key);
    } catch (const DataError&) {
        throw ConfigError("config: " + key + ": invalid value '" + value + "'");
    }
}

inline std::vector<std::uint64_t> config_seed_list(const std::string& key, const std::string& value) {
    std::vector<std::uint64_t> seeds;
    for (const auto& item : csv::split_record(value)) {
        std::string s = item;
        s.erase(0, s.find_first_not_of(' '));
        s.erase(s.find_last_not_of(' ') + 1);
        seeds.push_back(config_number<std::uint64_t>(key, s));
    }
    return seeds;
}

} // namespace detail

/// Applies parsed keys; unknown keys are rejected. The accepted keys are
/// listed in the README.
inline void apply_config(Settings& s, const std::map<std::string, std::string>& kv) {
    using detail::config_number;
    for (const auto& [key, value] : kv) {
        if (key == "data.endpoint") s.klines.endpoint = value;
        else if (key == "data.rate_limit_ms") s.klines.rate_limit_ms = config_number<int>(key, value);
        else if (key == "data.max_retries") s.klines.max_retries = config_number<int>(key, value);
        else if (key == "data.timeout_s") s.klines.timeout_s = config_number<int>(key, value);
        else if (key == "data.symbol") s.symbol = value;
        else if (key == "data.start") s.start = value;
        else if (key == "data.end") s.end = value;
        else if (key == "synth.bars") s.synth_bars = config_number<std::size_t>(key, value);
        else if (key == "synth.hour_amplitude") s.synth.hour_amplitude = config_number<double>(key, value);
        else if (key == "synth.dow_amplitude") s.synth.dow_amplitude = config_number<double>(key, value);
        else if (key == "synth.volume_noise") s.synth.volume_noise = config_number<double>(key, value);
        else if (key == "synth.volume_persistence") s.synth.volume_persistence = config_number<double>(key, value);
        else if (key == "synth.price_volatility") s.synth.price_volatility = config_number<double>(key, value);
        else if (key == "synth.volatility_coupling") s.synth.volatility_coupling = config_number<double>(key, value);
        else if (key == "synth.base_volume") s.synth.base_volume = config_number<double>(key, value);
        else if (key == "synth.start_price") s.synth.start_price = config_number<double>(key, value);
        else if (key == "features.lookback") s.features.lookback = config_number<std::size_t>(key, value);
        else if (key == "features.horizon") s.features.horizon = config_number<std::size_t>(key, value);
        else if (key == "features.rolling_window") s.features.rolling_window = config_number<std::size_t>(key, value);
        else if (key == "split.test_fraction") s.split.test_fraction = config_number<double>(key, value);
        else if (key == "split.validation_fraction") s.split.validation_fraction_of_remainder = config_number<double>(key, value);
        else if (key == "model.hidden") s.sizes.hidden = config_number<std::size_t>(key, value);
        else if (key == "model.mlp_hidden") s.sizes.mlp_hidden = config_number<std::size_t>(key, value);
        else if (key == "model.tkan_sublayers") s.sizes.tkan_sublayers = config_number<std::size_t>(key, value);
        else if (key == "model.kan_inputs") s.sizes.kan_inputs = config_number<std::size_t>(key, value);
        else if (key == "model.kan_outputs") s.sizes.kan_outputs = config_number<std::size_t>(key, value);
        else if (key == "model.grid_size") s.sizes.grid_size = config_number<std::size_t>(key, value);
        else if (key == "model.spline_order") s.sizes.spline_order = config_number<std::size_t>(key, value);
        else if (key == "train.batch_size") s.train.batch_size = config_number<std::size_t>(key, value);
        else if (key == "train.max_epochs") s.train.max_epochs = config_number<std::size_t>(key, value);
        else if (key == "train.initial_lr") s.train.initial_lr = config_number<double>(key, value);
        else if (key == "train.early_stop_patience") s.train.early_stop_patience = config_number<std::size_t>(key, value);
        else if (key == "train.early_stop_min_delta") s.train.early_stop_min_delta = config_number<double>(key, value);
        else if (key == "train.lr_reduce_patience") s.train.lr_reduce_patience = config_number<std::size_t>(key, value);
        else if (key == "train.lr_reduce_factor") s.train.lr_reduce_factor = config_number<double>(key, value);
        else if (key == "train.lr_floor") s.train.lr_floor = config_number<double>(key, value);
        else if (key == "train.seeds") s.train.seeds = detail::config_seed_list(key, value);
        else throw ConfigError("config: unknown key '" + key + "'");
    }
}

} // namespace vwapforge
