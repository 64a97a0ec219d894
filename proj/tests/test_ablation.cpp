#include <gtest/gtest.h>

#include <cmath>

#include "lightweather/ablation.hpp"
#include "test_support.hpp"

using namespace lightweather;

namespace {

ModelConfig tiny_model() {
    ModelConfig cfg;
    cfg.hidden_dim = 8;
    cfg.history_len = 12;
    cfg.horizon_len = 8;
    return cfg;
}

}  // namespace

TEST(HistoricalInertia, SliceCopy) {
    Tensor3 history(5, 1, 1);
    for (std::size_t t = 0; t < 5; ++t) history(t, 0, 0) = static_cast<double>(t) - 1.0;  // (-1, 0, 1, 2, 3)
    const auto f = hi_forecast(history, 3);
    EXPECT_EQ(f(0, 0, 0), 1.0);
    EXPECT_EQ(f(1, 0, 0), 2.0);
    EXPECT_EQ(f(2, 0, 0), 3.0);
}

TEST(HistoricalInertia, HorizonLongerThanHistoryRejected) {
    EXPECT_THROW((void)hi_forecast(Tensor3(3, 1, 1), 4), ConfigError);
}

TEST(HistoricalInertia, ConstantSeriesIsExact) {
    ObservationSet obs = lwtest::small_synthetic(3, 400, 12, 8);
    for (double& v : obs.values.values()) v = 4.25;
    const auto splits = chronological_split(obs.num_steps(), 12, 8);
    const auto m = evaluate_hi(obs, splits.test, 12, 8);
    EXPECT_EQ(m.mse, 0.0);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_GT(m.n_points, 0u);
}

TEST(HistoricalInertia, PooledMetricsMatchWindowLoop) {
    const auto obs = lwtest::small_synthetic(2, 400, 12, 8);
    const IndexRange range{280, 400};
    const auto view = make_windows(obs, range, 12, 8);
    MetricsAccumulator acc;
    for (std::size_t w = 0; w < view.size(); ++w) {
        const auto s = view[w];
        acc.add(hi_forecast(s.history, 8), s.future);
    }
    const auto got = evaluate_hi(obs, range, 12, 8);
    EXPECT_NEAR(got.mse, acc.result().mse, 1e-12 * acc.result().mse);
    EXPECT_EQ(got.n_points, acc.result().n_points);
}

TEST(HistoricalInertia, AppendingOwnForecastKeepsSliceCopy) {
    const auto history = lwtest::random_tensor(10, 2, 1, 3);
    const auto f = hi_forecast(history, 4);
    Tensor3 extended(14, 2, 1);
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t t = 0; t < 10; ++t) extended(t, n, 0) = history(t, n, 0);
        for (std::size_t t = 0; t < 4; ++t) extended(10 + t, n, 0) = f(t, n, 0);
    }
    EXPECT_EQ(hi_forecast(extended, 4), f);
}

TEST(Variants, SpecsInReportOrder) {
    const auto specs = ablation_specs();
    ASSERT_EQ(specs.size(), 4u);
    EXPECT_EQ(specs[0].label(), "none/abs");
    EXPECT_EQ(specs[1].label(), "abs/none");
    EXPECT_EQ(specs[2].label(), "rel/abs");
    EXPECT_EQ(specs[3].label(), "abs/abs");
}

TEST(Variants, FullSpecEqualsBaseModel) {
    const auto base = tiny_model();
    const auto variant = build_variant({}, base, 3, 9);
    const auto direct = init_params(base, 9);
    const auto history = lwtest::random_tensor(12, 3, 1, 1);
    const auto coords = lwtest::random_coords(3, 1);
    EXPECT_EQ(forward(history, coords, {1, 2, 3}, variant), forward(history, coords, {1, 2, 3}, direct));
}

TEST(Variants, NoneNoneHasOnlyEmbeddingAndEncoder) {
    const auto p = build_variant({SpatialEncoding::none, TemporalEncoding::none}, tiny_model(), 3, 1);
    EXPECT_TRUE(p.fc_spatial.empty());
    EXPECT_EQ(p.station_table.size(), 0);
    EXPECT_EQ(p.table_hour.size() + p.table_day.size() + p.table_month.size(), 0);
}

TEST(Variants, RelativeNeedsStationCountAndAddsTable) {
    const AblationSpec rel{SpatialEncoding::relative, TemporalEncoding::absolute};
    EXPECT_THROW((void)build_variant(rel, tiny_model(), 0, 1), ConfigError);
    const auto p = build_variant(rel, tiny_model(), 6, 1);
    EXPECT_EQ(p.station_table.rows(), 6);
    EXPECT_EQ(p.station_table.cols(), 8);
    const auto abs_count = parameter_count(variant_config({}, tiny_model(), 6));
    EXPECT_EQ(static_cast<std::int64_t>(count_parameters(p)) - abs_count, 6 * 8 - 4 * 8);
}

TEST(Variants, RelativeEncodingIgnoresCoordinates) {
    const auto p = build_variant({SpatialEncoding::relative, TemporalEncoding::absolute}, tiny_model(), 2, 4);
    const auto history = lwtest::random_tensor(12, 2, 1, 2);
    EXPECT_EQ(forward(history, lwtest::random_coords(2, 1), {0, 0, 0}, p),
              forward(history, lwtest::random_coords(2, 2), {0, 0, 0}, p));
}

TEST(Suite, NeedsThreeSeeds) {
    const auto data = prepare_data(lwtest::small_synthetic(2, 400, 12, 8), 12, 8, true);
    EXPECT_THROW((void)run_ablation_suite(data, tiny_model(), TrainConfig{}, {1, 2}), ConfigError);
}

TEST(Suite, AllVariantsFiniteAndSummarized) {
    const auto data = prepare_data(lwtest::small_synthetic(3, 400, 12, 8), 12, 8, true);
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.patience = 2;
    const auto runs = run_ablation_suite(data, tiny_model(), tc, {1, 2, 3});
    ASSERT_EQ(runs.size(), 12u);
    for (const auto& r : runs) {
        EXPECT_TRUE(std::isfinite(r.test.mse));
        EXPECT_TRUE(std::isfinite(r.test.mae));
    }
    const auto summary = summarize(runs);
    ASSERT_EQ(summary.size(), 4u);
    for (const auto& s : summary) EXPECT_EQ(s.runs, 3u);
    EXPECT_NEAR(summary[0].mean_mse, (runs[0].test.mse + runs[1].test.mse + runs[2].test.mse) / 3.0, 1e-12);

    lwtest::TempDir dir;
    write_ablation_csv(dir / "a.csv", runs);
    const auto loaded = load_ablation_csv(dir / "a.csv");
    ASSERT_EQ(loaded.size(), runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        EXPECT_EQ(loaded[i].spec, runs[i].spec);
        EXPECT_EQ(loaded[i].seed, runs[i].seed);
        EXPECT_EQ(loaded[i].test.mse, runs[i].test.mse);
    }
}
