#pragma once

#include <vector>

#include "vwapforge/numerics/tape.hpp"

namespace vwapforge {

/// Hidden states h_1..h_T of a recurrent scan, one (batch x m) node per step.
using HiddenSequence = std::vector<Var>;

/// Input sequence: one (batch x d) node per timestep.
using InputSequence = std::vector<Var>;

namespace detail {

inline void check_scan_inputs(const InputSequence& xs, std::size_t steps, std::size_t width, const char* cell) {
    if (steps > xs.size()) {
        throw ShapeError(std::string(cell) + ": asked for " + std::to_string(steps) + " steps, input has " +
                         std::to_string(xs.size()));
    }
    for (std::size_t t = 0; t < steps; ++t) {
        if (xs[t].cols() != width) {
            throw ShapeError(std::string(cell) + ": input at timestep " + std::to_string(t) + " has width " +
                             std::to_string(xs[t].cols()) + ", expected " + std::to_string(width));
        }
        if (!xs[t].value().all_finite()) {
            throw NumericError(std::string(cell) + ": non-finite input at timestep " + std::to_string(t));
        }
    }
}

} // namespace detail
} // namespace vwapforge
