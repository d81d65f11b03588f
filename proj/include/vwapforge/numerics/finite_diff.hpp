#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vwapforge/numerics/param_store.hpp"

namespace vwapforge {

using GradientMap = std::map<std::string, Tensor>;

/// Central-difference gradient (f(w+e) - f(w-e)) / 2e for every scalar entry.
/// Parameter values are restored bit-exactly after each probe.
inline GradientMap finite_diff_grad(const std::function<double(ParamStore&)>& loss_fn, ParamStore& params,
                                    double step) {
    if (!(step > 0.0)) throw Error("finite_diff_grad: step must be positive");
    GradientMap out;
    for (auto& [name, e] : params.entries()) {
        Tensor g(e.value.shape(), 0.0);
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double w = e.value[i];
            e.value[i] = w + step;
            const double up = loss_fn(params);
            e.value[i] = w - step;
            const double down = loss_fn(params);
            e.value[i] = w;
            if (!std::isfinite(up) || !std::isfinite(down)) {
                throw NumericError("finite_diff_grad: non-finite loss when perturbing " + name + "[" +
                                   std::to_string(i) + "]");
            }
            g[i] = (up - down) / (2.0 * step);
        }
        out.emplace(name, std::move(g));
    }
    return out;
}

/// Loss evaluation that also reports which smooth piece of a piecewise
/// function it landed on (see Tape kink recording).
struct PiecewiseEval {
    double loss = 0.0;
    std::vector<std::uint8_t> signature;
};

struct GradientCheck {
    std::size_t compared = 0;
    std::size_t excluded = 0;  // probes that crossed a kink
    double max_rel_error = 0.0;
    std::string worst_entry;
};

/// Relative error with an absolute floor so entries whose true gradient is
/// numerically zero do not dominate.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), floor});
    return std::fabs(analytic - numeric) / denom;
}

/// Compares analytic gradients against central differences, skipping entries
/// whose +/- probes land on a different smooth piece than the base point.
inline GradientCheck check_gradients(const std::function<PiecewiseEval(ParamStore&)>& eval,
                                     ParamStore& params, const GradientMap& analytic, double step,
                                     double floor = 1e-6) {
    if (!(step > 0.0)) throw Error("check_gradients: step must be positive");
    GradientCheck report;
    const std::vector<std::uint8_t> base = eval(params).signature;
    for (auto& [name, e] : params.entries()) {
        const Tensor& a = analytic.at(name);
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double w = e.value[i];
            e.value[i] = w + step;
            const PiecewiseEval up = eval(params);
            e.value[i] = w - step;
            const PiecewiseEval down = eval(params);
            e.value[i] = w;
            if (up.signature != base || down.signature != base) {
                ++report.excluded;
                continue;
            }
            if (!std::isfinite(up.loss) || !std::isfinite(down.loss)) {
                throw NumericError("check_gradients: non-finite loss when perturbing " + name);
            }
            const double numeric = (up.loss - down.loss) / (2.0 * step);
            const double err = relative_error(a[i], numeric, floor);
            ++report.compared;
            if (err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_entry = name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return report;
}

} // namespace vwapforge
