#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "vwapforge/recurrent/kan.hpp"
#include "vwapforge/recurrent/lstm.hpp"
#include "vwapforge/recurrent/tkan.hpp"

using namespace vwapforge;
using vwapforge::testing::GraphFn;
using vwapforge::testing::gradient_check;
using vwapforge::testing::random_tensor;

namespace {

// Textbook Cox-de Boor recursion on the explicit extended knot vector
// t_j = lower + (j - k) * h, j = 0 .. G + 2k. Half-open spans.
double de_boor(int j, int k, double x, const std::vector<double>& knots) {
    if (k == 0) return (knots[j] <= x && x < knots[j + 1]) ? 1.0 : 0.0;
    const double left = (x - knots[j]) / (knots[j + k] - knots[j]);
    const double right = (knots[j + k + 1] - x) / (knots[j + k + 1] - knots[j + 1]);
    return left * de_boor(j, k - 1, x, knots) + right * de_boor(j + 1, k - 1, x, knots);
}

std::vector<double> oracle_basis(double x, int G = 5, int k = 3, double lo = -1.0, double hi = 1.0) {
    std::vector<double> knots;
    const double h = (hi - lo) / G;
    for (int j = 0; j <= G + 2 * k; ++j) knots.push_back(lo + (j - k) * h);
    x = std::min(std::max(x, lo), std::nextafter(hi, lo));
    std::vector<double> out;
    for (int j = 0; j < G + k; ++j) out.push_back(de_boor(j, k, x, knots));
    return out;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu_ref(double x) { return x * sig(x); }

InputSequence as_inputs(Tape& t, const std::vector<Tensor>& rows) {
    InputSequence xs;
    for (const auto& r : rows) xs.push_back(t.constant(r));
    return xs;
}

std::vector<Tensor> random_rows(Rng& rng, std::size_t steps, std::size_t batch, std::size_t d) {
    std::vector<Tensor> rows;
    for (std::size_t s = 0; s < steps; ++s) rows.push_back(random_tensor(rng, batch, d));
    return rows;
}

void set_scalar(ParamStore& p, const std::string& name, double v) { p.set(name, Tensor({1, 1}, v)); }

} // namespace

TEST(BSpline, MatchesCoxDeBoorOracle) {
    SplineGrid g;
    ASSERT_EQ(g.basis_count(), 8u);
    std::vector<double> vals(8), ders(8);
    for (double x = -0.999; x < 1.0; x += 0.0137) {
        bspline_eval(g, x, vals.data(), ders.data());
        const auto ref = oracle_basis(x);
        double total = 0.0;
        for (std::size_t c = 0; c < 8; ++c) {
            EXPECT_NEAR(vals[c], ref[c], 1e-13) << "x=" << x << " c=" << c;
            total += vals[c];
        }
        EXPECT_NEAR(total, 1.0, 1e-13);
    }
}

TEST(BSpline, DerivativeMatchesOracleDifferences) {
    SplineGrid g;
    std::vector<double> vals(8), ders(8);
    for (double x : {-0.93, -0.41, 0.05, 0.333, 0.77}) {
        bspline_eval(g, x, vals.data(), ders.data());
        const auto up = oracle_basis(x + 1e-6);
        const auto down = oracle_basis(x - 1e-6);
        for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(ders[c], (up[c] - down[c]) / 2e-6, 1e-6);
    }
}

TEST(BSpline, InputsClampToGrid) {
    SplineGrid g;
    std::vector<double> a(8), b(8), da(8), db(8);
    bspline_eval(g, 3.0, a.data(), da.data());
    bspline_eval(g, 1.0, b.data(), db.data());
    EXPECT_EQ(a, b);
    for (double d : da) EXPECT_EQ(d, 0.0);
    bspline_eval(g, -7.0, a.data(), da.data());
    const auto ref = oracle_basis(-1.0);
    for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(a[c], ref[c], 1e-14);
}

TEST(Kan, ZeroCoefficientsGiveZero) {
    ParamStore p;
    KanLayerSpec spec{3, 2, {}};
    kan_register(p, "k", spec);
    p.value("k.base").fill(0.0);
    Rng rng(1);
    Tape t;
    Var y = kan_layer(t, p, "k", spec, t.constant(random_tensor(rng, 4, 3)));
    for (double v : y.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Kan, IdentityBaseAtZeroIsSiluOfZero) {
    ParamStore p;
    KanLayerSpec spec{2, 2, {}};
    kan_register(p, "k", spec);
    p.set("k.base", Tensor({2, 2}, std::vector<double>{1, 0, 0, 1}));
    Tape t;
    Var y = kan_layer(t, p, "k", spec, t.constant(Tensor::matrix(1, 2, 0.0)));
    EXPECT_EQ(y.value()[0], 0.0);
    EXPECT_EQ(y.value()[1], 0.0);
}

TEST(Kan, SingleSplineCoefficientTimesBasis) {
    ParamStore p;
    KanLayerSpec spec{1, 1, {}};
    kan_register(p, "k", spec);
    p.value("k.base").fill(0.0);
    p.value("k.spline")[4] = 2.75;
    for (double s : {-0.8, -0.2, 0.15, 0.61, 0.95}) {
        Tape t;
        Var y = kan_layer(t, p, "k", spec, t.constant(Tensor::matrix(1, 1, s)));
        EXPECT_NEAR(y.value()[0], 2.75 * oracle_basis(s)[4], 1e-13) << s;
    }
}

TEST(Kan, ZeroSplinesIsSiluLinearMap) {
    ParamStore p(4);
    KanLayerSpec spec{3, 2, {}};
    kan_register(p, "k", spec);
    Rng rng(9);
    const Tensor s = random_tensor(rng, 2, 3, -2.0, 2.0);
    Tape t;
    Var y = kan_layer(t, p, "k", spec, t.constant(s));
    const Tensor& W = p.value("k.base");
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t j = 0; j < 2; ++j) {
            double ref = 0.0;
            for (std::size_t i = 0; i < 3; ++i) ref += silu_ref(s[r * 3 + i]) * W[i * 2 + j];
            EXPECT_NEAR(y.value()[r * 2 + j], ref, 1e-14);
        }
}

TEST(Kan, GradientMatchesFiniteDifferences) {
    ParamStore p(5);
    KanLayerSpec spec{3, 2, {}};
    kan_register(p, "k", spec);
    Rng rng(6);
    p.set("k.spline", random_tensor(rng, 24, 2));
    p.set("s", random_tensor(rng, 4, 3, -1.3, 1.3));
    GraphFn f = [&](Tape& t, ParamStore& ps) {
        return sum(square(kan_layer(t, ps, "k", spec, tanh(scale(t.param(ps, "s"), 1.4)))));
    };
    const GradientCheck r = gradient_check(f, p);
    EXPECT_GE(r.compared, 50u);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_entry;
}

TEST(Lstm, ZeroWeightsGiveZeroHidden) {
    ParamStore p;
    LstmSpec spec{3, 4};
    lstm_register(p, "cell", spec);
    for (auto& [name, e] : p.entries()) e.value.fill(0.0);
    Rng rng(1);
    Tape t;
    auto rows = random_rows(rng, 5, 2, 3);
    HiddenSequence hs = lstm_scan(t, p, "cell", spec, as_inputs(t, rows));
    ASSERT_EQ(hs.size(), 5u);
    for (Var h : hs)
        for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, ScalarStepMatchesHandCalculation) {
    ParamStore p;
    LstmSpec spec{1, 1};
    lstm_register(p, "cell", spec);
    const double wf = 0.3, uf = -0.2, bf = 0.1, wi = -0.5, ui = 0.4, bi = 0.05;
    const double wc = 0.9, uc = 0.7, bc = -0.3, wo = 0.6, uo = 0.25, bo = 0.2;
    set_scalar(p, "cell.W_f", wf); set_scalar(p, "cell.U_f", uf); set_scalar(p, "cell.b_f", bf);
    set_scalar(p, "cell.W_i", wi); set_scalar(p, "cell.U_i", ui); set_scalar(p, "cell.b_i", bi);
    set_scalar(p, "cell.W_c", wc); set_scalar(p, "cell.U_c", uc); set_scalar(p, "cell.b_c", bc);
    set_scalar(p, "cell.W_o", wo); set_scalar(p, "cell.U_o", uo); set_scalar(p, "cell.b_o", bo);
    const double x1 = 0.8, x2 = -1.1;
    Tape t;
    HiddenSequence hs = lstm_scan(t, p, "cell", spec, as_inputs(t, {Tensor({1, 1}, x1), Tensor({1, 1}, x2)}));

    double h = 0.0, c = 0.0;
    double expected[2];
    for (int s = 0; s < 2; ++s) {
        const double x = s == 0 ? x1 : x2;
        const double f = sig(wf * x + uf * h + bf);
        const double i = sig(wi * x + ui * h + bi);
        const double cand = std::tanh(wc * x + uc * h + bc);
        const double o = sig(wo * x + uo * h + bo);
        c = f * c + i * cand;
        h = o * std::tanh(c);
        expected[s] = h;
    }
    EXPECT_NEAR(hs[0].value()[0], expected[0], 1e-12);
    EXPECT_NEAR(hs[1].value()[0], expected[1], 1e-12);
}

TEST(Lstm, RejectsNonFiniteInputWithTimestep) {
    ParamStore p;
    LstmSpec spec{2, 3};
    lstm_register(p, "cell", spec);
    Tape t;
    std::vector<Tensor> rows(4, Tensor::matrix(1, 2, 0.5));
    rows[2][1] = std::nan("");
    try {
        lstm_scan(t, p, "cell", spec, as_inputs(t, rows));
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("timestep 2"), std::string::npos) << e.what();
    }
    std::vector<Tensor> wide(2, Tensor::matrix(1, 3, 0.5));
    EXPECT_THROW(lstm_scan(t, p, "cell", spec, as_inputs(t, wide)), ShapeError);
}

TEST(Tkan, ZeroWeightsGiveZeroHidden) {
    ParamStore p;
    TkanSpec spec{3, 4, 2, 0, 5, {}};
    tkan_register(p, "cell", spec);
    for (auto& [name, e] : p.entries()) e.value.fill(0.0);
    Rng rng(2);
    Tape t;
    HiddenSequence hs = tkan_scan(t, p, "cell", spec, as_inputs(t, random_rows(rng, 6, 3, 3)));
    for (Var h : hs)
        for (double v : h.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Tkan, TwoScalarStepsMatchHandCalculation) {
    ParamStore p;
    TkanSpec spec{1, 1, 1, 1, 1, {}};
    tkan_register(p, "cell", spec);
    const double a = 0.8, b = 0.5, beta = 0.7, whh = 0.4, whz = 0.9;
    const double wf = 0.3, uf = -0.2, bf = 0.1, wi = -0.5, ui = 0.4, bi = 0.05;
    const double wc = 1.2, bc = -0.1, wo = -0.6, bo = 0.3;
    const std::vector<double> coef{0.1, -0.4, 0.25, 0.8, -0.3, 0.6, 0.05, -0.2};
    set_scalar(p, "cell.sub0.W_x", a);
    set_scalar(p, "cell.sub0.W_h", b);
    set_scalar(p, "cell.sub0.kan.base", beta);
    p.set("cell.sub0.kan.spline", Tensor({8, 1}, coef));
    set_scalar(p, "cell.sub0.W_hh", whh);
    set_scalar(p, "cell.sub0.W_hz", whz);
    set_scalar(p, "cell.W_f", wf); set_scalar(p, "cell.U_f", uf); set_scalar(p, "cell.b_f", bf);
    set_scalar(p, "cell.W_i", wi); set_scalar(p, "cell.U_i", ui); set_scalar(p, "cell.b_i", bi);
    set_scalar(p, "cell.W_c", wc); set_scalar(p, "cell.b_c", bc);
    set_scalar(p, "cell.W_o", wo); set_scalar(p, "cell.b_o", bo);
    const double xs[2] = {0.3, -0.6};
    Tape t;
    HiddenSequence hs = tkan_scan(t, p, "cell", spec, as_inputs(t, {Tensor({1, 1}, xs[0]), Tensor({1, 1}, xs[1])}));

    double sub = 0.0, h = 0.0, c = 0.0;
    for (int s = 0; s < 2; ++s) {
        const double x = xs[s];
        const double sin = x * a + sub * b;
        const auto B = oracle_basis(sin);
        double kan = beta * silu_ref(sin);
        for (int j = 0; j < 8; ++j) kan += coef[j] * B[j];
        sub = sub * whh + kan * whz;
        const double o = sig(kan * wo + bo);
        const double f = sig(x * wf + h * uf + bf);
        const double i = sig(x * wi + h * ui + bi);
        c = f * c + i * std::tanh(kan * wc + bc);
        h = o * std::tanh(c);
        EXPECT_NEAR(hs[s].value()[0], h, 1e-12) << "step " << s;
    }
}

TEST(Tkan, KanInputsDefaultToFeatureWidth) {
    TkanSpec spec;
    spec.inputs = 6;
    EXPECT_EQ(spec.kan_in(), 6u);
    spec.kan_inputs = 4;
    EXPECT_EQ(spec.kan_in(), 4u);
    ParamStore p;
    tkan_register(p, "cell", spec);
    EXPECT_EQ(p.value("cell.sub0.W_x").shape(), (Shape{6, 4}));
    EXPECT_EQ(p.value("cell.W_o").shape(), (Shape{40, 100}));
}

class ScanCausality : public ::testing::TestWithParam<bool> {};

TEST_P(ScanCausality, FutureRowsNeverChangePastStates) {
    const bool use_tkan = GetParam();
    ParamStore p(8);
    LstmSpec ls{3, 5};
    TkanSpec ts{3, 5, 2, 0, 4, {}};
    use_tkan ? tkan_register(p, "cell", ts) : lstm_register(p, "cell", ls);
    Rng rng(13);
    const std::size_t T = 8;
    const auto base_rows = random_rows(rng, T, 2, 3);
    auto scan = [&](const std::vector<Tensor>& rows) {
        Tape t;
        t.disable_gradients();
        InputSequence xs = as_inputs(t, rows);
        HiddenSequence hs = use_tkan ? tkan_scan(t, p, "cell", ts, xs) : lstm_scan(t, p, "cell", ls, xs);
        std::vector<Tensor> out;
        for (Var h : hs) out.push_back(h.value());
        return out;
    };
    const auto full = scan(base_rows);
    for (std::size_t cut = 0; cut < T; ++cut) {
        auto zeroed = base_rows, randomized = base_rows;
        for (std::size_t s = cut + 1; s < T; ++s) {
            zeroed[s].fill(0.0);
            randomized[s] = random_tensor(rng, 2, 3, -5.0, 5.0);
        }
        const auto hz = scan(zeroed), hr = scan(randomized);
        for (std::size_t s = 0; s <= cut; ++s) {
            EXPECT_EQ(hz[s], full[s]);
            EXPECT_EQ(hr[s], full[s]);
        }
        Tape t;
        InputSequence prefix = as_inputs(t, std::vector<Tensor>(base_rows.begin(), base_rows.begin() + cut + 1));
        HiddenSequence hs = use_tkan ? tkan_scan(t, p, "cell", ts, prefix) : lstm_scan(t, p, "cell", ls, prefix);
        EXPECT_EQ(hs.back().value(), full[cut]);
    }
}

INSTANTIATE_TEST_SUITE_P(Cells, ScanCausality, ::testing::Values(false, true),
                         [](const auto& info) { return std::string(info.param ? "Tkan" : "Lstm"); });

class ScanGradient : public ::testing::TestWithParam<bool> {};

TEST_P(ScanGradient, TwoStepScanMatchesFiniteDifferences) {
    const bool use_tkan = GetParam();
    ParamStore p(21);
    LstmSpec ls{2, 3};
    TkanSpec ts{2, 3, 2, 0, 3, {}};
    use_tkan ? tkan_register(p, "cell", ts) : lstm_register(p, "cell", ls);
    Rng rng(22);
    for (auto& [name, e] : p.entries())
        for (auto& v : e.value.storage()) v = rng.uniform(-0.8, 0.8);
    const auto rows = random_rows(rng, 2, 2, 2);
    const Tensor weights = random_tensor(rng, 2, 3);
    GraphFn f = [&](Tape& t, ParamStore& ps) {
        InputSequence xs = as_inputs(t, rows);
        HiddenSequence hs = use_tkan ? tkan_scan(t, ps, "cell", ts, xs) : lstm_scan(t, ps, "cell", ls, xs);
        return add(sum(mul(hs[1], t.constant(weights))), sum(square(hs[0])));
    };
    const GradientCheck r = gradient_check(f, p);
    EXPECT_GE(r.compared, 40u);
    EXPECT_LE(r.max_rel_error, 1e-4) << r.worst_entry;
}

INSTANTIATE_TEST_SUITE_P(Cells, ScanGradient, ::testing::Values(false, true),
                         [](const auto& info) { return std::string(info.param ? "Tkan" : "Lstm"); });
