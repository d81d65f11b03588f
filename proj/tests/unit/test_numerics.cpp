#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"
#include "vwapforge/numerics/adam.hpp"
#include "vwapforge/numerics/checkpoint.hpp"

using namespace vwapforge;
using vwapforge::testing::random_tensor;

TEST(Tensor, ShapeMustMatchValues) {
    EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5, 0.0)), ShapeError);
    EXPECT_THROW(Tensor({0, 3}), ShapeError);
    Tensor t({2, 3}, 1.5);
    EXPECT_EQ(t.size(), 6u);
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_EQ(t.cols(), 3u);
    EXPECT_TRUE(t.all_finite());
    t[4] = std::nan("");
    EXPECT_FALSE(t.all_finite());
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        differs |= x != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, UniformAndNormalMoments) {
    Rng rng(7);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
    for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.below(7), 7u);
}

TEST(ParamStore, NamesUniqueAndGradShapes) {
    ParamStore p(3);
    p.add("w", {3, 4});
    p.add("b", {1, 4}, Init::zeros);
    EXPECT_THROW(p.add("w", {1, 1}), Error);
    EXPECT_EQ(p.grad("w").shape(), p.value("w").shape());
    EXPECT_EQ(p.scalar_count(), 16u);
    for (double v : p.value("b").values()) EXPECT_EQ(v, 0.0);
    const double limit = std::sqrt(6.0 / 7.0);
    for (double v : p.value("w").values()) EXPECT_LE(std::fabs(v), limit);
    p.grad("w").fill(3.0);
    p.zero_grads();
    for (double v : p.grad("w").values()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(p.set("b", Tensor({2, 4}, 0.0)), ShapeError);
}

TEST(ParamStore, InitializationIsSeeded) {
    ParamStore a(11), b(11), c(12);
    for (auto* p : {&a, &b, &c}) {
        p->add("x", {5, 5});
        p->add("y", {5, 2});
    }
    EXPECT_TRUE(a.same_values(b));
    EXPECT_FALSE(a.same_values(c));
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamStore p;
    p.set("w", Tensor({1, 1}, 0.5));
    AdamState st;
    p.grad("w")[0] = 1.0;
    adam_step(st, p);
    // m = 0.1, v = 0.001; bias correction gives m_hat = v_hat = 1.
    const double w1 = 0.5 - 0.001 * 1.0 / (1.0 + 1e-7);
    EXPECT_DOUBLE_EQ(p.value("w")[0], w1);
    EXPECT_NEAR(p.value("w")[0] - 0.5, -0.001, 1e-9);
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, SecondStepWithConstantGradient) {
    ParamStore p;
    p.set("w", Tensor({1, 1}, 0.5));
    AdamState st;
    p.grad("w")[0] = 1.0;
    adam_step(st, p);
    const double w1 = p.value("w")[0];
    adam_step(st, p);
    // t = 2: m = 0.19, v = 0.001999, m_hat = 0.19 / 0.19, v_hat = 0.001999 / 0.001999.
    const double m_hat = (0.9 * 0.1 + 0.1) / (1 - 0.81);
    const double v_hat = (0.999 * 0.001 + 0.001) / (1 - 0.998001);
    EXPECT_NEAR(p.value("w")[0], w1 - 0.001 * m_hat / (std::sqrt(v_hat) + 1e-7), 1e-15);
    EXPECT_LT(p.value("w")[0], w1);
    EXPECT_EQ(st.step, 2);
}

TEST(Adam, ZeroGradientLeavesValues) {
    Rng rng(5);
    ParamStore p;
    p.set("w", random_tensor(rng, 3, 3));
    const Tensor before = p.value("w");
    AdamState st;
    for (int i = 0; i < 3; ++i) adam_step(st, p);
    EXPECT_EQ(p.value("w"), before);
    EXPECT_EQ(st.step, 3);
}

TEST(Adam, LearningRateRespectsFloor) {
    AdamState st;
    st.lr_floor = 2.5e-5;
    st.set_learning_rate(1e-6);
    EXPECT_EQ(st.learning_rate, 2.5e-5);
    EXPECT_THROW(st.set_learning_rate(0.0), Error);
}

TEST(FiniteDiff, CubicAndConstant) {
    ParamStore p;
    p.set("w", Tensor({1, 1}, 2.0));
    auto g = finite_diff_grad([](ParamStore& s) { const double w = s.value("w")[0]; return w * w * w; }, p, 1e-5);
    EXPECT_NEAR(g.at("w")[0], 12.0, 1e-6);
    EXPECT_EQ(p.value("w")[0], 2.0);

    p.set("v", Tensor({2, 2}, 0.3));
    auto z = finite_diff_grad([](ParamStore&) { return 4.25; }, p, 1e-5);
    for (const auto& [name, t] : z)
        for (double x : t.values()) EXPECT_NEAR(x, 0.0, 1e-9);
    EXPECT_THROW(finite_diff_grad([](ParamStore&) { return 0.0; }, p, 0.0), Error);
}

TEST(Gradient, SquareAtThree) {
    ParamStore p;
    p.set("w", Tensor({1, 1}, 3.0));
    Tape t;
    Var w = t.param(p, "w");
    t.backward(sum(mul(w, w)));
    EXPECT_EQ(p.grad("w")[0], 6.0);
}

TEST(Gradient, SumIsAllOnes) {
    ParamStore p;
    p.set("w", Tensor({1, 4}, std::vector<double>{0.5, -1.0, 2.0, 7.0}));
    Tape t;
    t.backward(sum(t.param(p, "w")));
    for (double g : p.grad("w").values()) EXPECT_EQ(g, 1.0);
}

TEST(Gradient, TanhMlpSeventeenParams) {
    Rng rng(17);
    ParamStore p(17);
    p.add("W1", {2, 3});
    p.set("b1", random_tensor(rng, 1, 3));
    p.add("W2", {3, 2});
    p.set("b2", random_tensor(rng, 1, 2));
    ASSERT_EQ(p.scalar_count(), 17u);
    const Tensor x = random_tensor(rng, 4, 2);
    const Tensor y = random_tensor(rng, 4, 2);
    auto f = [&](Tape& t, ParamStore& s) {
        Var h = tanh(add_row(matmul(t.constant(x), t.param(s, "W1")), t.param(s, "b1")));
        Var o = tanh(add_row(matmul(h, t.param(s, "W2")), t.param(s, "b2")));
        return mean(square(sub(o, t.constant(y))));
    };
    // Independent oracle: plain central differences on a scalar evaluation.
    const GradientMap numeric = finite_diff_grad(
        [&](ParamStore& s) {
            Tape t;
            return f(t, s).value()[0];
        },
        p, 1e-5);
    const GradientMap analytic = vwapforge::testing::analytic_gradients(f, p);
    double worst = 0.0;
    for (const auto& [name, g] : analytic)
        for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, relative_error(g[i], numeric.at(name)[i]));
    EXPECT_LE(worst, 1e-4);
}

TEST(Tape, ShapeErrorNamesOperands) {
    Tape t;
    Var a = t.variable(Tensor::matrix(2, 3, 1.0));
    Var b = t.variable(Tensor::matrix(2, 3, 1.0));
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    }
}

TEST(Tape, NonFiniteValueNamesNode) {
    Tape t;
    Var a = t.variable(Tensor::matrix(1, 1, 1e308));
    try {
        scale(a, 10.0);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("node"), std::string::npos);
    }
}

TEST(Checkpoint, RoundTripIsBitExact) {
    Rng rng(99);
    ParamStore p(99);
    p.add("recurrent.lstm.W_f", {6, 8});
    p.set("allocation.base_logits", random_tensor(rng, 1, 12, -1e-300, 1e300));
    p.value("allocation.base_logits")[0] = 0.1;
    p.value("allocation.base_logits")[1] = 1.0 / 3.0;
    p.value("allocation.base_logits")[2] = -0.0;
    const auto path = (std::filesystem::temp_directory_path() / "vwapforge_ckpt_test.json").string();
    save_checkpoint(path, p, {{"note", "x"}});
    const Checkpoint ck = load_checkpoint(path);
    EXPECT_TRUE(ck.params.same_values(p));
    EXPECT_EQ(ck.params.rng_seed(), 99u);
    EXPECT_EQ(ck.metadata.at("note"), "x");
    for (const auto& [name, e] : p.entries()) {
        const Tensor& q = ck.params.value(name);
        for (std::size_t i = 0; i < q.size(); ++i) {
            EXPECT_EQ(std::memcmp(q.values().data() + i, e.value.values().data() + i, sizeof(double)), 0) << name << "[" << i << "]";
        }
    }
    std::filesystem::remove(path);
}

TEST(Checkpoint, RejectsUnknownVersion) {
    nlohmann::json doc = checkpoint_to_json(ParamStore(1), {});
    doc["format_version"] = 2;
    EXPECT_THROW(checkpoint_from_json(doc), Error);
}
