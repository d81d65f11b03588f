#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "vwapforge/allocation/model.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/numerics/adam.hpp"
#include "vwapforge/objectives/objectives.hpp"
#include "vwapforge/training/config.hpp"
#include "vwapforge/training/monitor.hpp"

namespace vwapforge {

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double learning_rate = 0.0;  // rate used during this epoch
    bool improved = false;
};

struct TrainResult {
    ParamStore params;
    std::vector<EpochRecord> history;
    double best_val_loss = 0.0;
    std::size_t best_epoch = 0;
    std::size_t epochs_run = 0;
    double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

namespace detail {

inline void gather_targets(const std::vector<WindowSample>& samples, std::span<const std::size_t> idx, std::size_t h,
                           Tensor& prices, Tensor& fractions) {
    prices = Tensor::matrix(idx.size(), h);
    fractions = Tensor::matrix(idx.size(), h);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const WindowSample& s = samples[idx[r]];
        if (s.target_prices.size() != h) throw ShapeError("train: sample horizon does not match the model");
        std::copy(s.target_prices.begin(), s.target_prices.end(), &prices[r * h]);
        std::copy(s.target_volume_fractions.begin(), s.target_volume_fractions.end(), &fractions[r * h]);
    }
}

inline void check_samples(const ModelSpec& spec, const std::vector<WindowSample>& samples, const char* what) {
    if (samples.empty()) throw DataError(std::string("train: ") + what + " set is empty");
    for (const auto& s : samples) {
        if (s.rows != spec.sequence_length() || s.target_prices.size() != spec.horizon) {
            throw ShapeError(std::string("train: ") + what + " sample shape does not match the model (lookback " +
                             std::to_string(spec.lookback) + ", horizon " + std::to_string(spec.horizon) + ")");
        }
    }
}

} // namespace detail

/// Loss of a frozen model over a dataset, using the training objective.
inline double dataset_loss(const ModelSpec& spec, const ParamStore& params, LossKind kind,
                           const std::vector<WindowSample>& samples, std::size_t batch_size = 256) {
    const Evaluation ev = evaluate(spec, params, samples, batch_size);
    std::vector<WindowOutcome> outcomes;
    outcomes.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        outcomes.push_back({samples[i].target_prices, ev.allocations[i], samples[i].target_volume_fractions});
    }
    return loss(kind, outcomes);
}

/// Mini-batch Adam training with early stopping and plateau LR reduction.
/// The seed drives both initialization and the shuffle stream. The returned
/// parameters are those of the best validation epoch.
inline TrainResult train(const ModelSpec& spec, LossKind kind, const std::vector<WindowSample>& train_set,
                         const std::vector<WindowSample>& val_set, const TrainConfig& cfg, std::uint64_t seed,
                         const EpochCallback& on_epoch = {}) {
    spec.validate();
    cfg.validate();
    detail::check_samples(spec, train_set, "training");
    detail::check_samples(spec, val_set, "validation");

    const auto started = std::chrono::steady_clock::now();
    TrainResult result{ParamStore(seed), {}, 0.0, 0, 0, 0.0};
    ParamStore& params = result.params;
    register_model(spec, params);
    if (!spec.has_parameters()) {
        result.best_val_loss = dataset_loss(spec, params, kind, val_set);
        return result;
    }

    Rng shuffle_rng(seed ^ 0x5DEECE66DULL);
    AdamState adam;
    adam.lr_floor = cfg.lr_floor;
    adam.set_learning_rate(cfg.initial_lr);
    PlateauMonitor monitor(cfg);
    ParamStore best = params;

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Tensor prices, fractions;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            const std::span<const std::size_t> idx(order.data() + begin, end - begin);
            std::vector<std::span<const double>> windows;
            windows.reserve(idx.size());
            for (std::size_t i : idx) windows.push_back(train_set[i].features());
            detail::gather_targets(train_set, idx, spec.horizon, prices, fractions);

            const auto where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
            double value = 0.0;
            try {
                Tape t;
                Var curve = model_forward(t, params, spec, windows);
                Var l = loss_on_tape(t, kind, curve, prices, fractions);
                value = l.value()[0];
                if (!std::isfinite(value)) throw TrainingError("train: non-finite loss at " + where);
                params.zero_grads();
                t.backward(l);
            } catch (const NumericError& e) {
                throw TrainingError("train: numeric failure at " + where + ": " + e.what());
            }
            for (const auto& [name, e] : params.entries()) {
                if (!e.grad.all_finite()) throw TrainingError("train: non-finite gradient for " + name + " at " + where);
            }
            adam_step(adam, params);
            loss_sum += value * static_cast<double>(idx.size());
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.learning_rate = adam.learning_rate;
        rec.val_loss = dataset_loss(spec, params, kind, val_set);
        if (!std::isfinite(rec.val_loss)) {
            throw TrainingError("train: non-finite validation loss at epoch " + std::to_string(epoch));
        }
        const auto decision = monitor.update(rec.val_loss);
        rec.improved = decision.improved;
        if (decision.improved) best = params;
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (decision.stop) break;
        if (decision.reduce_lr) adam.set_learning_rate(monitor.next_lr(adam.learning_rate));
    }

    params = std::move(best);
    result.best_val_loss = monitor.best();
    result.best_epoch = monitor.best_epoch();
    result.epochs_run = result.history.size();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

inline void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_loss,learning_rate,improved\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << csv::format_double(r.train_loss) << ',' << csv::format_double(r.val_loss) << ','
            << csv::format_double(r.learning_rate) << ',' << (r.improved ? 1 : 0) << '\n';
    }
}

} // namespace vwapforge
