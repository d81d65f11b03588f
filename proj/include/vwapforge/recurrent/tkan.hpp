#pragma once

#include <string>
#include <vector>

#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tape.hpp"
#include "vwapforge/recurrent/hidden.hpp"
#include "vwapforge/recurrent/kan.hpp"

namespace vwapforge {

struct TkanSpec {
    std::size_t inputs = 6;
    std::size_t hidden = 100;
    std::size_t sublayers = 2;
    std::size_t kan_inputs = 0;  // 0 means "same as inputs"
    std::size_t kan_outputs = 20;
    SplineGrid grid{};

    std::size_t kan_in() const { return kan_inputs == 0 ? inputs : kan_inputs; }
    KanLayerSpec kan_spec() const { return KanLayerSpec{kan_in(), kan_outputs, grid}; }
};

inline std::string tkan_sublayer_prefix(const std::string& prefix, std::size_t l) {
    return prefix + ".sub" + std::to_string(l);
}

/// Per sublayer l: W_x (d x KAN_in), W_h (KAN_out x KAN_in), kan.{base,spline},
/// W_hh and W_hz (KAN_out x KAN_out). Global: forget/input gates over
/// (x, h), candidate W_c over the concatenated sublayer outputs, output gate
/// W_o/b_o over the same concatenation.
inline void tkan_register(ParamStore& store, const std::string& prefix, const TkanSpec& spec) {
    if (spec.sublayers == 0) throw Error("tkan: need at least one sublayer");
    const std::size_t kin = spec.kan_in(), kout = spec.kan_outputs, m = spec.hidden;
    for (std::size_t l = 0; l < spec.sublayers; ++l) {
        const std::string p = tkan_sublayer_prefix(prefix, l);
        store.add(p + ".W_x", {spec.inputs, kin}, Init::glorot_uniform);
        store.add(p + ".W_h", {kout, kin}, Init::glorot_uniform);
        kan_register(store, p + ".kan", spec.kan_spec());
        // The sub-state recursion is linear; start W_hh well inside the unit
        // spectral radius so long scans stay bounded at initialization.
        Tensor& whh = store.add(p + ".W_hh", {kout, kout}, Init::glorot_uniform);
        for (auto& v : whh.storage()) v *= 0.5;
        store.add(p + ".W_hz", {kout, kout}, Init::glorot_uniform);
    }
    const std::size_t r = kout * spec.sublayers;
    for (const char* gate : {"f", "i"}) {
        store.add(prefix + ".W_" + std::string(gate), {spec.inputs, m}, Init::glorot_uniform);
        store.add(prefix + ".U_" + std::string(gate), {m, m}, Init::glorot_uniform);
        store.add(prefix + ".b_" + std::string(gate), {1, m}, Init::zeros);
    }
    store.add(prefix + ".W_c", {r, m}, Init::glorot_uniform);
    store.add(prefix + ".b_c", {1, m}, Init::zeros);
    store.add(prefix + ".W_o", {r, m}, Init::glorot_uniform);
    store.add(prefix + ".b_o", {1, m}, Init::zeros);
}

/// TKAN scan from zero states. Per step and sublayer l:
///   s_l = x W_x,l + h~_l W_h,l          o~_l = KAN_l(s_l)
///   h~_l <- h~_l W_hh,l + o~_l W_hz,l
///   r = [o~_1 | ... | o~_L]
///   o = sigmoid(r W_o + b_o)
///   f = sigmoid(x W_f + h U_f + b_f)    i = sigmoid(x W_i + h U_i + b_i)
///   c = f * c + i * tanh(r W_c + b_c)   h = o * tanh(c)
inline HiddenSequence tkan_scan(Tape& t, ParamStore& store, const std::string& prefix, const TkanSpec& spec,
                                const InputSequence& xs, std::size_t steps) {
    detail::check_scan_inputs(xs, steps, spec.inputs, "tkan_scan");
    const std::size_t m = spec.hidden, L = spec.sublayers, kout = spec.kan_outputs;
    const KanLayerSpec kspec = spec.kan_spec();

    struct Sub {
        std::string prefix;
        Var W_x, W_h, W_hh, W_hz;
    };
    std::vector<Sub> subs;
    for (std::size_t l = 0; l < L; ++l) {
        const std::string p = tkan_sublayer_prefix(prefix, l);
        subs.push_back(Sub{p, t.param(store, p + ".W_x"), t.param(store, p + ".W_h"), t.param(store, p + ".W_hh"),
                           t.param(store, p + ".W_hz")});
    }
    Var Wfi = concat_cols({t.param(store, prefix + ".W_f"), t.param(store, prefix + ".W_i")});
    Var Ufi = concat_cols({t.param(store, prefix + ".U_f"), t.param(store, prefix + ".U_i")});
    Var bfi = concat_cols({t.param(store, prefix + ".b_f"), t.param(store, prefix + ".b_i")});
    Var Wco = concat_cols({t.param(store, prefix + ".W_c"), t.param(store, prefix + ".W_o")});
    Var bco = concat_cols({t.param(store, prefix + ".b_c"), t.param(store, prefix + ".b_o")});

    HiddenSequence hs;
    hs.reserve(steps);
    if (steps == 0) return hs;
    const std::size_t batch = xs[0].rows();
    Var h = t.constant(Tensor::matrix(batch, m));
    Var c = h;
    std::vector<Var> sub_state(L, t.constant(Tensor::matrix(batch, kout)));
    std::vector<Var> outs(L);
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t l = 0; l < L; ++l) {
            const Sub& sub = subs[l];
            Var in = add(matmul(xs[s], sub.W_x), matmul(sub_state[l], sub.W_h));
            outs[l] = kan_layer(t, store, sub.prefix + ".kan", kspec, in);
            sub_state[l] = add(matmul(sub_state[l], sub.W_hh), matmul(outs[l], sub.W_hz));
        }
        Var r = L == 1 ? outs[0] : concat_cols(outs);
        Var zfi = add_row(add(matmul(xs[s], Wfi), matmul(h, Ufi)), bfi);
        Var zco = add_row(matmul(r, Wco), bco);
        Var f = sigmoid(slice_cols(zfi, 0, m));
        Var i = sigmoid(slice_cols(zfi, m, m));
        Var cand = tanh(slice_cols(zco, 0, m));
        Var o = sigmoid(slice_cols(zco, m, m));
        c = add(mul(f, c), mul(i, cand));
        h = mul(o, tanh(c));
        hs.push_back(h);
    }
    return hs;
}

inline HiddenSequence tkan_scan(Tape& t, ParamStore& store, const std::string& prefix, const TkanSpec& spec,
                                const InputSequence& xs) {
    return tkan_scan(t, store, prefix, spec, xs, xs.size());
}

} // namespace vwapforge
