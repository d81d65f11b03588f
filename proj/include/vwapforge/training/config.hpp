#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "vwapforge/error.hpp"

namespace vwapforge {

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t max_epochs = 1000;
    double initial_lr = 0.001;
    std::size_t early_stop_patience = 10;
    double early_stop_min_delta = 0.00001;
    std::size_t lr_reduce_patience = 5;
    double lr_reduce_factor = 0.25;
    double lr_floor = 0.000025;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    void validate() const {
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
        if (!(initial_lr > 0.0)) throw ConfigError("train: initial_lr must be positive");
        if (early_stop_patience < 1 || lr_reduce_patience < 1) throw ConfigError("train: patience values must be >= 1");
        if (!(lr_reduce_factor > 0.0 && lr_reduce_factor < 1.0)) throw ConfigError("train: lr_reduce_factor must be in (0, 1)");
        if (!(lr_floor > 0.0)) throw ConfigError("train: lr_floor must be positive");
        if (!(early_stop_min_delta >= 0.0)) throw ConfigError("train: early_stop_min_delta must be >= 0");
        if (seeds.empty()) throw ConfigError("train: at least one seed is required");
    }
};

} // namespace vwapforge
