#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "vwapforge/features/features.hpp"
#include "vwapforge/objectives/objectives.hpp"

using namespace vwapforge;
using vwapforge::testing::gradient_check;
using vwapforge::testing::make_series;

namespace {

using Vec = std::vector<double>;

double one_line_slippage(const Vec& p, const Vec& v, const Vec& f) {
    double a = 0, b = 0;
    for (std::size_t k = 0; k < p.size(); ++k) a += p[k] * v[k], b += p[k] * f[k];
    return a / b - 1.0;
}

// 50 windows with non-trivial prices and volumes.
std::vector<WindowSample> fifty_windows() {
    FeatureConfig cfg;
    cfg.lookback = 6;
    cfg.horizon = 5;
    cfg.rolling_window = 10;
    const std::size_t n = cfg.first_feature_bar() + cfg.window_span() + 49;
    Vec vol(n), px(n);
    for (std::size_t i = 0; i < n; ++i) {
        vol[i] = (i % 13 == 4) ? 0.0 : 1.0 + 0.8 * std::sin(1.3 * static_cast<double>(i)) + 0.1 * static_cast<double>(i % 7);
        px[i] = 250.0 * (1.0 + 0.02 * std::sin(0.21 * static_cast<double>(i)) + 0.005 * std::cos(2.7 * static_cast<double>(i)));
    }
    FeatureSet set = build_features(make_series(vol, px), cfg);
    EXPECT_EQ(set.samples.size(), 50u);
    return set.samples;
}

std::vector<Vec> random_curves(std::size_t count, std::size_t h, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> out;
    for (std::size_t w = 0; w < count; ++w) {
        Vec v(h);
        double total = 0;
        for (auto& x : v) total += (x = rng.uniform(0.0, 1.0));
        for (auto& x : v) x /= total;
        out.push_back(v);
    }
    return out;
}

} // namespace

TEST(Slippage, MatchingCurveIsZero) {
    const Vec p{100, 101, 99.5, 103}, f{0.1, 0.4, 0.3, 0.2};
    EXPECT_EQ(slippage(p, f, f), 0.0);
}

TEST(Slippage, ConstantPriceIsZero) {
    const Vec p(5, 42.0), f{0.2, 0.2, 0.2, 0.2, 0.2}, v{0.5, 0.0, 0.1, 0.3, 0.1};
    EXPECT_NEAR(slippage(p, v, f), 0.0, 1e-15);
}

TEST(Slippage, WorkedExample) {
    const Vec p{100, 102, 98}, f{0.5, 0.3, 0.2}, v{0.2, 0.3, 0.5};
    // (0.2*100 + 0.3*102 + 0.5*98) / (0.5*100 + 0.3*102 + 0.2*98) - 1 = 99.6 / 100.2 - 1
    const double expected = 99.6 / 100.2 - 1.0;
    EXPECT_NEAR(slippage(p, v, f), expected, 1e-12);
    EXPECT_NEAR(slippage(p, v, f), one_line_slippage(p, v, f), 1e-12);
}

TEST(Slippage, PriceScaleInvariant) {
    const Vec p{100, 102, 98}, f{0.5, 0.3, 0.2}, v{0.2, 0.3, 0.5};
    for (double lambda : {1e-3, 7.0, 1e5}) {
        Vec q = p;
        for (auto& x : q) x *= lambda;
        EXPECT_NEAR(slippage(q, v, f), slippage(p, v, f), 1e-14);
    }
}

TEST(Slippage, Errors) {
    EXPECT_THROW(slippage(Vec{1, 2}, Vec{1}, Vec{1, 0}), ShapeError);
    EXPECT_THROW(slippage(Vec{1, 2}, Vec{0.5, 0.5}, Vec{0, 0}), DataError);
}

TEST(Loss, ThreeKinds) {
    const Vec p{100, 102, 98}, f{0.5, 0.3, 0.2}, v{0.2, 0.3, 0.5};
    const WindowOutcome single[] = {{p, v, f}};
    const double s = one_line_slippage(p, v, f);
    EXPECT_NEAR(loss(LossKind::absolute_vwap, single), std::fabs(s), 1e-15);
    EXPECT_NEAR(loss(LossKind::quadratic_vwap, single), s * s, 1e-17);

    const WindowOutcome exact[] = {{p, f, f}, {p, f, f}};
    for (auto k : {LossKind::absolute_vwap, LossKind::quadratic_vwap, LossKind::volume_curve}) {
        EXPECT_EQ(loss(k, exact), 0.0);
    }

    const Vec uniform(4, 0.25), market{0.75, 0.25, 0.0, 0.0}, price(4, 10.0);
    const WindowOutcome curve[] = {{price, uniform, market}};
    EXPECT_EQ(loss(LossKind::volume_curve, curve), 0.09375);

    const Vec zeros(3, 0.0);
    const WindowOutcome degenerate[] = {{p, v, zeros}};
    EXPECT_THROW(loss(LossKind::absolute_vwap, degenerate), DegenerateWindow);
    EXPECT_THROW(loss(LossKind::absolute_vwap, std::span<const WindowOutcome>{}), DataError);
}

TEST(Loss, NamesParse) {
    for (auto k : {LossKind::absolute_vwap, LossKind::quadratic_vwap, LossKind::volume_curve}) {
        EXPECT_EQ(parse_loss(loss_name(k)), k);
    }
    EXPECT_THROW(parse_loss("hinge"), ConfigError);
}

TEST(Loss, TapeMatchesPlainLoss) {
    const auto samples = fifty_windows();
    const auto curves = random_curves(samples.size(), 5, 3);
    const std::size_t h = 5, b = samples.size();
    Tensor V = Tensor::matrix(b, h), P = Tensor::matrix(b, h), F = Tensor::matrix(b, h);
    std::vector<WindowOutcome> batch;
    for (std::size_t w = 0; w < b; ++w) {
        for (std::size_t k = 0; k < h; ++k) {
            V[w * h + k] = curves[w][k];
            P[w * h + k] = samples[w].target_prices[k];
            F[w * h + k] = samples[w].target_volume_fractions[k];
        }
        batch.push_back({samples[w].target_prices, curves[w], samples[w].target_volume_fractions});
    }
    for (auto k : {LossKind::absolute_vwap, LossKind::quadratic_vwap, LossKind::volume_curve}) {
        Tape t;
        const double on_tape = loss_on_tape(t, k, t.constant(V), P, F).value()[0];
        EXPECT_NEAR(on_tape, loss(k, batch), 1e-15) << loss_name(k);
    }
}

TEST(Loss, TapeGradients) {
    const Tensor P({2, 3}, {100, 102, 98, 50, 49, 52});
    const Tensor F({2, 3}, {0.5, 0.3, 0.2, 0.1, 0.1, 0.8});
    for (auto k : {LossKind::absolute_vwap, LossKind::quadratic_vwap, LossKind::volume_curve}) {
        ParamStore p;
        p.add("logits", {2, 3}, Init::zeros);
        p.value("logits") = Tensor({2, 3}, {0.1, -0.3, 0.7, 1.0, 0.2, -0.5});
        auto graph = [&](Tape& t, ParamStore& ps) { return loss_on_tape(t, k, softmax_rows(t.param(ps, "logits")), P, F); };
        const GradientCheck c = gradient_check(graph, p);
        EXPECT_EQ(c.compared, 6u);
        EXPECT_LE(c.max_rel_error, 1e-6) << loss_name(k);
    }
}

TEST(R2, UniformIsZeroAndPerfectIsOne) {
    const auto samples = fifty_windows();
    std::vector<Vec> targets, uniform;
    for (const auto& s : samples) {
        targets.push_back(s.target_volume_fractions);
        uniform.push_back(Vec(5, 0.2));
    }
    EXPECT_NEAR(r2_volume_curve(uniform, targets), 0.0, 1e-10);
    EXPECT_EQ(r2_volume_curve(targets, targets), 1.0);
    EXPECT_LE(r2_volume_curve(random_curves(50, 5, 8), targets), 1.0);
}

TEST(R2, TwoStepExample) {
    const std::vector<Vec> pred{{0.5, 0.5}}, target{{0.9, 0.1}};
    EXPECT_NEAR(r2_volume_curve(pred, target), 0.0, 1e-15);
    const std::vector<Vec> flat{{0.5, 0.5}};
    EXPECT_THROW(r2_volume_curve(pred, flat), DataError);
    EXPECT_THROW(r2_volume_curve(pred, std::vector<Vec>{}), ShapeError);
}

TEST(Evaluate, MatchesBruteForceOnFiftyWindows) {
    const auto samples = fifty_windows();
    const auto curves = random_curves(samples.size(), 5, 17);
    const Evaluation ev = evaluate_allocations(samples, curves);

    double abs_sum = 0, quad_sum = 0, resid = 0, base = 0;
    for (std::size_t w = 0; w < samples.size(); ++w) {
        const Vec& p = samples[w].target_prices;
        const Vec& f = samples[w].target_volume_fractions;
        const double s = one_line_slippage(p, curves[w], f);
        abs_sum += std::fabs(s);
        quad_sum += s * s;
        for (std::size_t k = 0; k < 5; ++k) {
            resid += std::pow(curves[w][k] - f[k], 2);
            base += std::pow(f[k] - 0.2, 2);
        }
        const double naive = one_line_slippage(p, Vec(5, 0.2), f);
        EXPECT_NEAR(ev.windows[w].signed_slippage, s, 1e-12);
        EXPECT_NEAR(ev.windows[w].abs_slippage_minus_naive, std::fabs(s) - std::fabs(naive), 1e-12);
        EXPECT_EQ(ev.windows[w].window_end_time, samples[w].end_time);
    }
    EXPECT_NEAR(ev.metrics.abs_vwap_loss, abs_sum / 50, 1e-12);
    EXPECT_NEAR(ev.metrics.quad_vwap_loss, quad_sum / 50, 1e-12);
    EXPECT_NEAR(ev.metrics.r2_volume, 1.0 - resid / base, 1e-12);
    EXPECT_EQ(ev.metrics.n_windows, 50u);
    ASSERT_EQ(ev.steps.size(), 5u);
    double mean0 = 0;
    for (const auto& c : curves) mean0 += c[0] / 50;
    EXPECT_NEAR(ev.steps[0].mean, mean0, 1e-15);
}

TEST(Evaluate, NaiveModelMatchesUniformBruteForce) {
    const auto samples = fifty_windows();
    ModelSpec spec;
    spec.set_name("naive");
    spec.lookback = 6;
    spec.horizon = 5;
    const Evaluation ev = evaluate(spec, ParamStore{}, samples, 7);
    double abs_sum = 0;
    for (const auto& s : samples) abs_sum += std::fabs(one_line_slippage(s.target_prices, Vec(5, 0.2), s.target_volume_fractions));
    EXPECT_NEAR(ev.metrics.abs_vwap_loss, abs_sum / 50, 1e-12);
    EXPECT_NEAR(ev.metrics.r2_volume, 0.0, 1e-10);
    for (const auto& w : ev.windows) EXPECT_EQ(w.abs_slippage_minus_naive, 0.0);
}

TEST(Evaluate, PerfectForesight) {
    const auto samples = fifty_windows();
    std::vector<Vec> perfect;
    for (const auto& s : samples) perfect.push_back(s.target_volume_fractions);
    const Evaluation ev = evaluate_allocations(samples, perfect);
    EXPECT_EQ(ev.metrics.abs_vwap_loss, 0.0);
    EXPECT_EQ(ev.metrics.quad_vwap_loss, 0.0);
    EXPECT_EQ(ev.metrics.r2_volume, 1.0);
    for (const auto& w : ev.windows) EXPECT_EQ(w.bound.allocation_term, 0.0);
}

TEST(Evaluate, SlippageBoundHolds) {
    const auto samples = fifty_windows();
    const Evaluation ev = evaluate_allocations(samples, random_curves(50, 5, 23));
    for (const auto& w : ev.windows) EXPECT_LE(w.abs_slippage, w.bound.price_term + w.bound.allocation_term + 1e-15);
}

TEST(Report, ScaledFormatting) {
    EXPECT_EQ(format_scaled(0.0015874311, 1e2), "0.15874311");
    EXPECT_EQ(format_scaled(0.0, 1e4), "0.00000000");
    EXPECT_EQ(format_scaled(3.5e-6, 1e4), "0.03500000");
}

TEST(Report, CsvExports) {
    const auto samples = fifty_windows();
    const Evaluation ev = evaluate_allocations(samples, random_curves(50, 5, 1));
    std::ostringstream a, b, c;
    write_slippage_csv(a, ev);
    write_allocation_stats_csv(b, ev);
    write_slippage_bound_csv(c, ev);
    auto lines = [](const std::string& s) { return std::count(s.begin(), s.end(), '\n'); };
    EXPECT_EQ(lines(a.str()), 51);
    EXPECT_EQ(lines(b.str()), 6);
    EXPECT_EQ(lines(c.str()), 51);
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "window_end_time,signed_slippage,abs_slippage,abs_slippage_minus_naive");
}
