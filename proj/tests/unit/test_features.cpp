#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_support.hpp"
#include "vwapforge/features/features.hpp"

using namespace vwapforge;
using vwapforge::testing::make_series;

namespace {

FeatureConfig small_config() {
    FeatureConfig cfg;
    cfg.lookback = 8;
    cfg.horizon = 4;
    cfg.rolling_window = 24;
    return cfg;
}

BarSeries hand_series(std::size_t n) {
    std::vector<double> vol(n), px(n);
    for (std::size_t i = 0; i < n; ++i) {
        vol[i] = 10.0 + 7.0 * std::sin(0.37 * static_cast<double>(i)) + static_cast<double>(i % 5);
        px[i] = 100.0 + 3.0 * std::cos(0.11 * static_cast<double>(i)) + 0.01 * static_cast<double>(i);
    }
    return make_series(vol, px);
}

} // namespace

TEST(Features, ConfigDerivedSizes) {
    const FeatureConfig cfg = small_config();
    EXPECT_EQ(cfg.sequence_length(), 11u);
    EXPECT_EQ(cfg.first_feature_bar(), 35u);
    EXPECT_EQ(cfg.minimum_bars(), 47u);
    FeatureConfig bad = cfg;
    bad.horizon = 1;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Features, ConstantVolumeNormalizesToOne) {
    const std::size_t n = 80;
    const BarSeries s = make_series(std::vector<double>(n, 5.0), std::vector<double>(n, 100.0));
    const FeatureTable table = compute_feature_table(s, small_config());
    for (std::size_t t = table.first_valid; t < n; ++t) {
        EXPECT_EQ(table.row(t)[0], 1.0) << t;
        EXPECT_EQ(table.row(t)[5], 0.0) << t;
    }
}

TEST(Features, MidnightMondayCalendarColumns) {
    const std::size_t n = 80;
    const BarSeries s = make_series(std::vector<double>(n, 5.0), std::vector<double>(n, 100.0));
    const FeatureTable table = compute_feature_table(s, small_config());
    const std::size_t t = 48;  // 2024-01-03T00:00Z, a Wednesday
    EXPECT_EQ(table.row(t)[1], 0.0);
    EXPECT_EQ(table.row(t)[2], 1.0);
    EXPECT_NEAR(table.row(t)[3], std::sin(2.0 * std::numbers::pi * 2.0 / 7.0), 1e-15);
    EXPECT_NEAR(table.row(t)[4], std::cos(2.0 * std::numbers::pi * 2.0 / 7.0), 1e-15);
    const std::size_t noon = 60;
    EXPECT_NEAR(table.row(noon)[1], 0.0, 1e-15);
    EXPECT_EQ(table.row(noon)[2], -1.0);
}

TEST(Features, RowMatchesIndependentRecomputation) {
    const BarSeries s = hand_series(500);
    const FeatureConfig cfg = small_config();
    const FeatureTable table = compute_feature_table(s, cfg);
    const std::size_t t = 450;
    // Rolling mean over bars 450-12-23 .. 450-12 inclusive.
    double sum = 0.0;
    for (std::size_t k = 415; k <= 438; ++k) sum += s.bars[k].volume;
    const double expected_norm = s.bars[t].volume / (sum / 24.0);
    // Bar 450 = 18 days + 18 hours after Monday 00:00 -> Friday 18:00.
    const double hour = 2.0 * std::numbers::pi * 18.0 / 24.0;
    const double dow = 2.0 * std::numbers::pi * 4.0 / 7.0;
    const double ret = s.bars[450].bin_vwap / s.bars[449].bin_vwap - 1.0;
    const double expected[6] = {expected_norm, std::sin(hour), std::cos(hour), std::sin(dow), std::cos(dow), ret};
    for (std::size_t k = 0; k < kFeatureCount; ++k) EXPECT_NEAR(table.row(t)[k], expected[k], 1e-12) << kFeatureNames[k];
}

TEST(Features, TargetsAreHorizonVolumeFractions) {
    std::vector<double> vol(60, 2.0), px(60, 50.0);
    for (std::size_t k = 0; k < 4; ++k) px[48 + k] = 50.0 + static_cast<double>(k);
    const BarSeries even = make_series(vol, px);
    const FeatureConfig cfg = small_config();
    const WindowTargets a = targets_for_window(even, 40, cfg);
    EXPECT_EQ(a.volume_fractions, (std::vector<double>{0.25, 0.25, 0.25, 0.25}));
    EXPECT_EQ(a.prices, (std::vector<double>{50.0, 51.0, 52.0, 53.0}));

    vol[48] = 3.0;
    vol[49] = 1.0;
    vol[50] = 0.0;
    vol[51] = 0.0;
    const WindowTargets b = targets_for_window(make_series(vol, px), 40, cfg);
    EXPECT_EQ(b.volume_fractions, (std::vector<double>{0.75, 0.25, 0.0, 0.0}));

    const BarSeries s = hand_series(300);
    for (const auto& w : build_features(s, cfg).samples) {
        double total = 0.0;
        for (double f : w.target_volume_fractions) total += f;
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Features, SampleViewsSharedTable) {
    const BarSeries s = hand_series(300);
    const FeatureConfig cfg = small_config();
    const FeatureSet set = build_features(s, cfg);
    ASSERT_EQ(set.samples.size(), 300u - cfg.first_feature_bar() - cfg.window_span() + 1);
    const WindowSample& w = set.samples[17];
    EXPECT_EQ(w.window_id, cfg.first_feature_bar() + 17);
    const Tensor m = w.feature_matrix();
    EXPECT_EQ(m.rows(), 11u);
    EXPECT_EQ(m.cols(), 6u);
    const FeatureTable table = compute_feature_table(s, cfg);
    for (std::size_t r = 0; r < 11; ++r)
        for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(m[r * 6 + k], table.row(w.window_id + r)[k]);
    EXPECT_EQ(w.end_time, s.bars[w.window_id + 11].open_time);
}

TEST(Features, NoLookAhead) {
    const BarSeries s = hand_series(300);
    const FeatureConfig cfg = small_config();
    const FeatureTable base = compute_feature_table(s, cfg);
    for (std::size_t cut : {60u, 150u, 299u}) {
        BarSeries changed = s;
        for (std::size_t k = cut; k < changed.size(); ++k) {
            changed.bars[k].volume *= 3.0;
            changed.bars[k].quote_volume *= 3.0;
            changed.bars[k].open *= 1.1;
            changed.bars[k].high *= 1.1;
            changed.bars[k].low *= 1.1;
            changed.bars[k].close *= 1.1;
            changed.bars[k].bin_vwap *= 1.1;
        }
        const FeatureTable after = compute_feature_table(changed, cfg);
        for (std::size_t t = base.first_valid; t < cut; ++t)
            for (std::size_t k = 0; k < 6; ++k) ASSERT_EQ(base.row(t)[k], after.row(t)[k]) << "cut " << cut << " row " << t;
        bool differs = false;
        for (std::size_t k = 0; k < 6; ++k) differs |= base.row(cut)[k] != after.row(cut)[k];
        EXPECT_TRUE(differs);
    }
}

TEST(Features, LastHorizonBarOnlyMovesTargets) {
    const BarSeries s = hand_series(200);
    const FeatureConfig cfg = small_config();
    const WindowSample before = build_features(s, cfg).samples[5];
    BarSeries changed = s;
    Bar& last = changed.bars[before.window_id + cfg.window_span() - 1];
    last.volume *= 4.0;
    last.quote_volume *= 4.0;
    const WindowSample after = build_features(changed, cfg).samples[5];
    const auto f0 = before.features(), f1 = after.features();
    ASSERT_EQ(f0.size(), f1.size());
    for (std::size_t i = 0; i < f0.size(); ++i) EXPECT_EQ(f0[i], f1[i]);
    EXPECT_NE(before.target_volume_fractions, after.target_volume_fractions);
}

TEST(Features, ShiftInvariance) {
    const BarSeries s = hand_series(400);
    const FeatureConfig cfg = small_config();
    BarSeries tail = s;
    const std::size_t drop = 29;
    tail.bars.erase(tail.bars.begin(), tail.bars.begin() + drop);
    const FeatureTable a = compute_feature_table(s, cfg);
    const FeatureTable b = compute_feature_table(tail, cfg);
    for (std::size_t t = b.first_valid; t < b.rows(); ++t)
        for (std::size_t k = 0; k < 6; ++k) ASSERT_EQ(b.row(t)[k], a.row(t + drop)[k]) << t;
}

TEST(Features, DegenerateWindowsAreDroppedAndCounted) {
    std::vector<double> vol(120, 4.0), px(120, 10.0);
    for (std::size_t k = 80; k < 86; ++k) vol[k] = 0.0;
    const BarSeries s = make_series(vol, px);
    const FeatureConfig cfg = small_config();
    EXPECT_THROW(targets_for_window(s, 80 - cfg.lookback, cfg), DegenerateWindow);
    const FeatureSet set = build_features(s, cfg);
    // Horizons starting at bars 80, 81 and 82 lie entirely inside the gap.
    EXPECT_EQ(set.degenerate_dropped, 3u);
    EXPECT_EQ(set.samples.size() + 3u, 120u - cfg.first_feature_bar() - cfg.window_span() + 1);
}

TEST(Features, InsufficientHistory) {
    const FeatureConfig cfg = small_config();
    const BarSeries s = hand_series(cfg.minimum_bars());
    EXPECT_EQ(build_features(s, cfg).samples.size(), 1u);
    BarSeries short_series = s;
    short_series.bars.pop_back();
    try {
        build_features(short_series, cfg);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("need at least 47"), std::string::npos) << e.what();
    }
}

TEST(Features, PartitionWindowsStayInside) {
    const BarSeries s = hand_series(1000);
    const FeatureConfig cfg = small_config();
    const PartitionedFeatures p = build_partitioned_features(s, cfg);
    EXPECT_EQ(p.bounds.test_size(), 200u);
    for (const auto* set : {&p.train, &p.validation, &p.test}) EXPECT_FALSE(set->samples.empty());
    for (const auto& w : p.validation.samples) {
        EXPECT_GE(w.window_id, p.bounds.validation_begin);
        EXPECT_LE(w.window_id + cfg.window_span(), p.bounds.validation_end);
    }
    EXPECT_EQ(p.test.samples.size(), 200u - cfg.window_span() + 1);
    EXPECT_EQ(p.train.samples.front().window_id, cfg.first_feature_bar());
}
