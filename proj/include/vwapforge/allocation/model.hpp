#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vwapforge/features/features.hpp"
#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tape.hpp"
#include "vwapforge/recurrent/lstm.hpp"
#include "vwapforge/recurrent/tkan.hpp"

namespace vwapforge {

enum class AllocatorKind { naive_uniform, static_rnn, dynamic_rnn };
enum class CellKind { lstm, tkan };

/// Architecture of an allocator. Everything needed to rebuild the parameter
/// layout from a checkpoint lives here.
struct ModelSpec {
    AllocatorKind kind = AllocatorKind::dynamic_rnn;
    CellKind cell = CellKind::lstm;
    std::size_t lookback = 120;
    std::size_t horizon = 12;
    std::size_t features = kFeatureCount;
    std::size_t hidden = 100;
    std::size_t mlp_hidden = 32;
    std::size_t tkan_sublayers = 2;
    std::size_t kan_inputs = 0;  // 0: same as features
    std::size_t kan_outputs = 20;
    std::size_t grid_size = 5;
    std::size_t spline_order = 3;

    std::size_t sequence_length() const { return lookback + horizon - 1; }
    bool has_parameters() const { return kind != AllocatorKind::naive_uniform; }

    std::string name() const {
        if (kind == AllocatorKind::naive_uniform) return "naive";
        const std::string c = cell == CellKind::lstm ? "lstm" : "tkan";
        return (kind == AllocatorKind::static_rnn ? "static-" : "dynamic-") + c;
    }

    /// Parses naive | static-lstm | static-tkan | dynamic-lstm | dynamic-tkan.
    void set_name(const std::string& model) {
        if (model == "naive") {
            kind = AllocatorKind::naive_uniform;
            return;
        }
        const auto dash = model.find('-');
        const std::string k = model.substr(0, dash);
        const std::string c = dash == std::string::npos ? "" : model.substr(dash + 1);
        if ((k != "static" && k != "dynamic") || (c != "lstm" && c != "tkan")) {
            throw ConfigError("unknown model '" + model +
                              "' (expected naive, static-lstm, static-tkan, dynamic-lstm or dynamic-tkan)");
        }
        kind = k == "static" ? AllocatorKind::static_rnn : AllocatorKind::dynamic_rnn;
        cell = c == "lstm" ? CellKind::lstm : CellKind::tkan;
    }

    LstmSpec lstm() const { return LstmSpec{features, hidden}; }
    TkanSpec tkan() const {
        TkanSpec t;
        t.inputs = features;
        t.hidden = hidden;
        t.sublayers = tkan_sublayers;
        t.kan_inputs = kan_inputs;
        t.kan_outputs = kan_outputs;
        t.grid = SplineGrid{grid_size, spline_order, -1.0, 1.0};
        return t;
    }

    void validate() const {
        if (lookback < 1) throw ConfigError("model: lookback must be >= 1");
        if (horizon < 2) throw ConfigError("model: horizon must be >= 2");
        if (features < 1 || hidden < 1 || mlp_hidden < 1) throw ConfigError("model: widths must be >= 1");
        if (cell == CellKind::tkan && (tkan_sublayers < 1 || kan_outputs < 1 || grid_size < 1)) {
            throw ConfigError("model: TKAN sizes must be >= 1");
        }
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"model", name()},
                              {"lookback", lookback},
                              {"horizon", horizon},
                              {"features", features},
                              {"hidden", hidden},
                              {"mlp_hidden", mlp_hidden},
                              {"tkan_sublayers", tkan_sublayers},
                              {"kan_inputs", kan_inputs},
                              {"kan_outputs", kan_outputs},
                              {"grid_size", grid_size},
                              {"spline_order", spline_order}};
    }

    static ModelSpec from_json(const nlohmann::json& j) {
        ModelSpec s;
        try {
            s.set_name(j.at("model").get<std::string>());
            s.lookback = j.at("lookback").get<std::size_t>();
            s.horizon = j.at("horizon").get<std::size_t>();
            s.features = j.at("features").get<std::size_t>();
            s.hidden = j.at("hidden").get<std::size_t>();
            s.mlp_hidden = j.at("mlp_hidden").get<std::size_t>();
            s.tkan_sublayers = j.at("tkan_sublayers").get<std::size_t>();
            s.kan_inputs = j.at("kan_inputs").get<std::size_t>();
            s.kan_outputs = j.at("kan_outputs").get<std::size_t>();
            s.grid_size = j.at("grid_size").get<std::size_t>();
            s.spline_order = j.at("spline_order").get<std::size_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("model spec: ") + e.what());
        }
        s.validate();
        return s;
    }
};

inline constexpr const char* kBaseLogits = "allocation.base_logits";

inline std::string adjustment_prefix(std::size_t i) { return "allocation.adjust" + std::to_string(i); }
inline std::string cell_prefix(CellKind c) { return c == CellKind::lstm ? "recurrent.lstm" : "recurrent.tkan"; }

/// Creates every parameter of the model in the store (no-op for naive).
inline void register_model(const ModelSpec& spec, ParamStore& store) {
    spec.validate();
    if (!spec.has_parameters()) return;
    if (spec.cell == CellKind::lstm) {
        lstm_register(store, cell_prefix(spec.cell), spec.lstm());
    } else {
        tkan_register(store, cell_prefix(spec.cell), spec.tkan());
    }
    if (spec.kind == AllocatorKind::static_rnn) {
        store.add("allocation.static.W", {spec.hidden, spec.horizon}, Init::glorot_uniform);
        store.add("allocation.static.b", {1, spec.horizon}, Init::zeros);
        return;
    }
    // Zero logits give the uniform starting curve 1/h.
    store.add(kBaseLogits, {1, spec.horizon}, Init::zeros);
    const std::size_t w = spec.mlp_hidden;
    for (std::size_t i = 0; i + 1 < spec.horizon; ++i) {
        const std::string p = adjustment_prefix(i);
        store.add(p + ".W1", {spec.hidden + i, w}, Init::glorot_uniform);
        store.add(p + ".b1", {1, w}, Init::zeros);
        store.add(p + ".W2", {w, w}, Init::glorot_uniform);
        store.add(p + ".b2", {1, w}, Init::zeros);
        store.add(p + ".W3", {w, 1}, Init::glorot_uniform);
        store.add(p + ".b3", {1, 1}, Init::zeros);
    }
}

/// Sets every adjustment-MLP tensor to zero, leaving f_i == 0 and alpha == 1.
inline void zero_adjustment(const ModelSpec& spec, ParamStore& store) {
    for (std::size_t i = 0; i + 1 < spec.horizon; ++i)
        for (const char* t : {".W1", ".b1", ".W2", ".b2", ".W3", ".b3"})
            store.value(adjustment_prefix(i) + t).fill(0.0);
}

/// v_b = softmax(logits), shape 1 x h.
inline Var base_curve(Tape& t, ParamStore& store) { return softmax_rows(t.param(store, kBaseLogits)); }

/// f_i(input) = W3 relu(W2 relu(W1 input + b1) + b2) + b3; output batch x 1.
inline Var adjustment_mlp(Tape& t, ParamStore& store, std::size_t i, Var input) {
    const std::string p = adjustment_prefix(i);
    Var a1 = relu(add_row(matmul(input, t.param(store, p + ".W1")), t.param(store, p + ".b1")));
    Var a2 = relu(add_row(matmul(a1, t.param(store, p + ".W2")), t.param(store, p + ".b2")));
    return add_row(matmul(a2, t.param(store, p + ".W3")), t.param(store, p + ".b3"));
}

/// Produces alpha_i (batch x 1) for step i (1-based) given v_1..v_{i-1}.
using AlphaFn = std::function<Var(std::size_t step, const std::vector<Var>& previous)>;

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kNegativeTolerance = 1e-12;

/// Sequential clipped allocation over a 1 x h base curve:
///   v_i = clamp(alpha_i * v_b[i], 0, 1 - sum_{j<i} v_j)   for i < h
///   v_h = the remaining volume
/// The remainder is evaluated as v_b[h] + sum_{i<h} (v_b[i] - v_i), which
/// equals 1 - sum_{i<h} v_i whenever v_b sums to one, and reproduces v_b[h]
/// bit-for-bit when no step was adjusted.
inline Var sequential_allocate(Tape& t, Var base, std::size_t batch, const AlphaFn& alpha_fn) {
    const std::size_t h = base.cols();
    if (base.rows() != 1 || h < 1) throw ShapeError("sequential_allocate: base curve must be 1 x h");
    Var ones = t.constant(Tensor::matrix(batch, 1, 1.0));
    Var zero = t.constant(Tensor::matrix(batch, 1, 0.0));
    Var spent = zero;
    Var deficit = zero;
    std::vector<Var> v;
    v.reserve(h);
    for (std::size_t i = 1; i < h; ++i) {
        Var vb_i = mul_row(ones, slice_cols(base, i - 1, 1));
        Var alpha = alpha_fn(i, v);
        if (alpha.rows() != batch || alpha.cols() != 1) {
            throw ShapeError("sequential_allocate: alpha for step " + std::to_string(i) + " must be batch x 1");
        }
        Var upper = add_scalar(scale(spent, -1.0), 1.0);
        Var vi = clamp(mul(alpha, vb_i), zero, upper);
        v.push_back(vi);
        spent = add(spent, vi);
        deficit = add(deficit, sub(vb_i, vi));
    }
    Var vb_h = mul_row(ones, slice_cols(base, h - 1, 1));
    v.push_back(add(vb_h, deficit));
    Var curve = v.size() == 1 ? v.front() : concat_cols(v);

    const Tensor& c = curve.value();
    for (std::size_t r = 0; r < batch; ++r) {
        double total = 0.0;
        for (std::size_t k = 0; k < h; ++k) {
            if (c[r * h + k] < -kNegativeTolerance) {
                throw NumericError("sequential_allocate: negative allocation at row " + std::to_string(r) + " step " +
                                   std::to_string(k + 1));
            }
            total += c[r * h + k];
        }
        if (std::fabs(total - 1.0) > kSimplexTolerance) {
            throw NumericError("sequential_allocate: allocations sum to " + std::to_string(total) + " at row " +
                               std::to_string(r));
        }
    }
    return curve;
}

/// Recurrent hidden states for the first `steps` timesteps.
inline HiddenSequence run_cell(Tape& t, ParamStore& store, const ModelSpec& spec, const InputSequence& xs,
                               std::size_t steps) {
    if (spec.cell == CellKind::lstm) return lstm_scan(t, store, cell_prefix(spec.cell), spec.lstm(), xs, steps);
    return tkan_scan(t, store, cell_prefix(spec.cell), spec.tkan(), xs, steps);
}

/// Dynamic allocator. Step i (1-based) reads hidden state index l+i-1
/// (1-based), i.e. the state after the last lookback bar for i = 1 and after
/// execution bar i-1 otherwise. MLP f_{i-1} sees [h ; v_1..v_{i-1}].
inline Var dynamic_allocate(Tape& t, ParamStore& store, const ModelSpec& spec, const HiddenSequence& hidden) {
    if (hidden.size() < spec.sequence_length()) {
        throw ShapeError("dynamic_allocate: need " + std::to_string(spec.sequence_length()) + " hidden states, got " +
                         std::to_string(hidden.size()));
    }
    const std::size_t batch = hidden.front().rows();
    Var base = base_curve(t, store);
    return sequential_allocate(t, base, batch, [&](std::size_t i, const std::vector<Var>& prev) {
        Var state = hidden[spec.lookback + i - 2];
        Var input = prev.empty() ? state : concat_cols([&] {
            std::vector<Var> parts{state};
            parts.insert(parts.end(), prev.begin(), prev.end());
            return parts;
        }());
        return add_scalar(tanh(adjustment_mlp(t, store, i - 1, input)), 1.0);
    });
}

/// Static allocator: softmax of a dense head on the last lookback state.
inline Var static_allocate(Tape& t, ParamStore& store, const ModelSpec& spec, const HiddenSequence& hidden) {
    if (hidden.size() < spec.lookback) throw ShapeError("static_allocate: hidden sequence shorter than lookback");
    Var logits = add_row(matmul(hidden[spec.lookback - 1], t.param(store, "allocation.static.W")),
                         t.param(store, "allocation.static.b"));
    return softmax_rows(logits);
}

inline std::vector<double> naive_allocate(std::size_t h) {
    if (h < 1) throw ConfigError("naive_allocate: horizon must be >= 1");
    return std::vector<double>(h, 1.0 / static_cast<double>(h));
}

/// Per-timestep (batch x d) constants from row-major (T x d) windows.
inline InputSequence make_inputs(Tape& t, const std::vector<std::span<const double>>& windows, std::size_t steps,
                                 std::size_t width) {
    InputSequence xs;
    xs.reserve(steps);
    const std::size_t batch = windows.size();
    for (std::size_t s = 0; s < steps; ++s) {
        Tensor x = Tensor::matrix(batch, width);
        for (std::size_t b = 0; b < batch; ++b) {
            if (windows[b].size() < steps * width) throw ShapeError("make_inputs: window shorter than the sequence");
            std::copy_n(windows[b].data() + s * width, width, x.storage().data() + b * width);
        }
        xs.push_back(t.constant(std::move(x)));
    }
    return xs;
}

/// Full forward pass for a batch of windows; returns the batch x h curve.
inline Var model_forward(Tape& t, ParamStore& store, const ModelSpec& spec,
                         const std::vector<std::span<const double>>& windows) {
    if (windows.empty()) throw ShapeError("model_forward: empty batch");
    const std::size_t batch = windows.size();
    if (spec.kind == AllocatorKind::naive_uniform) {
        return t.constant(Tensor::matrix(batch, spec.horizon, 1.0 / static_cast<double>(spec.horizon)));
    }
    const std::size_t steps = spec.kind == AllocatorKind::static_rnn ? spec.lookback : spec.sequence_length();
    InputSequence xs = make_inputs(t, windows, steps, spec.features);
    HiddenSequence hs = run_cell(t, store, spec, xs, steps);
    if (spec.kind == AllocatorKind::static_rnn) return static_allocate(t, store, spec, hs);
    return dynamic_allocate(t, store, spec, hs);
}

/// Inference on a frozen store; the store is only read.
inline Tensor allocate_batch(const ModelSpec& spec, const ParamStore& store,
                             const std::vector<std::span<const double>>& windows) {
    Tape t;
    t.disable_gradients();
    // Gradients are disabled, so the tape never writes to the store.
    Var curve = model_forward(t, const_cast<ParamStore&>(store), spec, windows);
    return curve.value();
}

inline std::vector<double> allocate(const ModelSpec& spec, const ParamStore& store, std::span<const double> window) {
    Tensor out = allocate_batch(spec, store, {window});
    return out.storage();
}

/// Number of allocations final once feature row t (1-based) is known.
/// Dynamic: v_i is decided at row l+i-1, and v_h with v_{h-1}. Static and
/// naive curves are fixed at execution start (row l).
inline std::size_t decided_count(const ModelSpec& spec, std::size_t t) {
    if (t < spec.lookback || t > spec.sequence_length()) {
        throw DataError("deploy: time index " + std::to_string(t) + " outside execution window [" +
                        std::to_string(spec.lookback) + ", " + std::to_string(spec.sequence_length()) + "]");
    }
    if (spec.kind != AllocatorKind::dynamic_rnn) return spec.horizon;
    const std::size_t decided = t - spec.lookback + 1;
    return decided + 1 >= spec.horizon ? spec.horizon : decided;
}

/// Real-time inference: feature rows after t (1-based) are replaced with
/// zeros, the full forward pass runs, and the allocations whose deciding
/// row is <= t are returned.
inline std::vector<double> deploy_step(const ModelSpec& spec, const ParamStore& store,
                                       std::span<const double> window, std::size_t t) {
    const std::size_t n = decided_count(spec, t);
    const std::size_t width = spec.features;
    if (window.size() < spec.sequence_length() * width) throw ShapeError("deploy_step: window too short");
    std::vector<double> padded(spec.sequence_length() * width, 0.0);
    std::copy_n(window.data(), t * width, padded.data());
    std::vector<double> curve = allocate(spec, store, padded);
    curve.resize(n);
    return curve;
}

} // namespace vwapforge
