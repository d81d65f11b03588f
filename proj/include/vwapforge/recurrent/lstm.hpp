#pragma once

#include <string>

#include "vwapforge/numerics/param_store.hpp"
#include "vwapforge/numerics/tape.hpp"
#include "vwapforge/recurrent/hidden.hpp"

namespace vwapforge {

struct LstmSpec {
    std::size_t inputs = 6;
    std::size_t hidden = 100;
};

/// Registers the forget, input, candidate and output gate tensors under
/// `<prefix>.{W,U,b}_{f,i,c,o}`. W is inputs x hidden, U is hidden x hidden.
inline void lstm_register(ParamStore& store, const std::string& prefix, const LstmSpec& spec) {
    for (const char* gate : {"f", "i", "c", "o"}) {
        store.add(prefix + ".W_" + gate, {spec.inputs, spec.hidden}, Init::glorot_uniform);
        store.add(prefix + ".U_" + gate, {spec.hidden, spec.hidden}, Init::glorot_uniform);
        store.add(prefix + ".b_" + gate, {1, spec.hidden}, Init::zeros);
    }
}

/// Runs the LSTM over the first `steps` inputs from h_0 = c_0 = 0.
///   f = sigmoid(x W_f + h U_f + b_f)   i = sigmoid(x W_i + h U_i + b_i)
///   o = sigmoid(x W_o + h U_o + b_o)   c~ = tanh(x W_c + h U_c + b_c)
///   c_t = f * c_{t-1} + i * c~         h_t = o * tanh(c_t)
inline HiddenSequence lstm_scan(Tape& t, ParamStore& store, const std::string& prefix, const LstmSpec& spec,
                                const InputSequence& xs, std::size_t steps) {
    detail::check_scan_inputs(xs, steps, spec.inputs, "lstm_scan");
    const std::size_t m = spec.hidden;
    // Gates stacked as [f | i | c | o] so each step needs two matmuls.
    Var W = concat_cols({t.param(store, prefix + ".W_f"), t.param(store, prefix + ".W_i"),
                         t.param(store, prefix + ".W_c"), t.param(store, prefix + ".W_o")});
    Var U = concat_cols({t.param(store, prefix + ".U_f"), t.param(store, prefix + ".U_i"),
                         t.param(store, prefix + ".U_c"), t.param(store, prefix + ".U_o")});
    Var b = concat_cols({t.param(store, prefix + ".b_f"), t.param(store, prefix + ".b_i"),
                         t.param(store, prefix + ".b_c"), t.param(store, prefix + ".b_o")});

    HiddenSequence hs;
    hs.reserve(steps);
    if (steps == 0) return hs;
    const std::size_t batch = xs[0].rows();
    Var h = t.constant(Tensor::matrix(batch, m));
    Var c = h;
    for (std::size_t s = 0; s < steps; ++s) {
        Var z = add_row(add(matmul(xs[s], W), matmul(h, U)), b);
        Var f = sigmoid(slice_cols(z, 0, m));
        Var i = sigmoid(slice_cols(z, m, m));
        Var cand = tanh(slice_cols(z, 2 * m, m));
        Var o = sigmoid(slice_cols(z, 3 * m, m));
        c = add(mul(f, c), mul(i, cand));
        h = mul(o, tanh(c));
        hs.push_back(h);
    }
    return hs;
}

inline HiddenSequence lstm_scan(Tape& t, ParamStore& store, const std::string& prefix, const LstmSpec& spec,
                                const InputSequence& xs) {
    return lstm_scan(t, store, prefix, spec, xs, xs.size());
}

} // namespace vwapforge
