#pragma once

#include <algorithm>
#include <limits>

#include "vwapforge/training/config.hpp"

namespace vwapforge {

/// Validation-loss plateau tracking shared by early stopping and learning
/// rate reduction. An epoch improves when its loss is not above
/// best - min_delta; the first epoch always improves. Both counters reset
/// on improvement and run independently otherwise; the LR counter also
/// resets after each reduction.
class PlateauMonitor {
public:
    struct Decision {
        bool improved = false;
        bool reduce_lr = false;
        bool stop = false;
    };

    explicit PlateauMonitor(const TrainConfig& cfg) : cfg_(cfg) {}

    Decision update(double val_loss) {
        Decision d;
        ++epoch_;
        if (epoch_ == 1 || !(val_loss > best_ - cfg_.early_stop_min_delta)) {
            best_ = val_loss;
            best_epoch_ = epoch_;
            stop_wait_ = 0;
            lr_wait_ = 0;
            d.improved = true;
            return d;
        }
        ++stop_wait_;
        ++lr_wait_;
        if (lr_wait_ >= cfg_.lr_reduce_patience) {
            d.reduce_lr = true;
            lr_wait_ = 0;
        }
        if (stop_wait_ >= cfg_.early_stop_patience) d.stop = true;
        return d;
    }

    double next_lr(double lr) const { return std::max(lr * cfg_.lr_reduce_factor, cfg_.lr_floor); }

    double best() const noexcept { return best_; }
    std::size_t best_epoch() const noexcept { return best_epoch_; }

private:
    TrainConfig cfg_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    std::size_t stop_wait_ = 0;
    std::size_t lr_wait_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

} // namespace vwapforge
