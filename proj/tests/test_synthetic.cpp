#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lightweather/synthetic.hpp"
#include "test_support.hpp"

using namespace lightweather;

namespace {

SynthConfig ar_config(double alpha_total, std::size_t order, double noise, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_stations = 4;
    cfg.n_steps = 10 * (order + 6);
    cfg.alpha.assign(order, alpha_total / static_cast<double>(order));
    cfg.horizon_len = 6;
    cfg.noise_std = noise;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(GFunction, ZeroAmplitudes) {
    SynthConfig cfg;
    cfg.amp_diurnal = cfg.amp_annual = cfg.amp_elev = 0.0;
    for (const auto& s : random_stations(20, 1)) {
        EXPECT_EQ(g_function(s.coord, cfg.start + std::chrono::hours{7}, cfg), 0.0);
    }
}

TEST(GFunction, DiurnalVanishesAtPole) {
    SynthConfig cfg;
    cfg.amp_annual = cfg.amp_elev = 0.0;
    for (int h = 0; h < 24; ++h) {
        EXPECT_NEAR(g_function({90.0, 37.0, 0.0}, cfg.start + std::chrono::hours{h}, cfg), 0.0, 1e-15);
    }
}

TEST(GFunction, HandValue) {
    SynthConfig cfg;
    cfg.amp_diurnal = 2.0;
    cfg.amp_annual = 0.5;
    cfg.amp_elev = 3.0;
    // 2019-02-01T06:00 -> hour 6, day of year 32.
    const auto ts = parse_timestamp("2019-02-01T06:00:00");
    const StationCoord c{60.0, 90.0, 1500.0};
    const double pi = std::numbers::pi;
    const double expected = 2.0 * std::sin(2 * pi * 6 / 24 + pi / 2) * 0.5 + 0.5 * std::sin(2 * pi * 32 / 365.25) + 4.5;
    EXPECT_NEAR(g_function(c, ts, cfg), expected, 1e-12);
    EXPECT_EQ(g_function(c, ts, cfg), g_function(c, ts, cfg));
}

TEST(Config, Validation) {
    SynthConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.alpha.assign(48, 1.0 / 48.0);
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.alpha.assign(48, 0.0);
    cfg.n_steps = 719;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg.n_steps = 720;
    EXPECT_NO_THROW(cfg.validate());
    cfg.noise_std = -1.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Generate, PureForcingAfterWarmup) {
    SynthConfig cfg;
    cfg.n_stations = 3;
    cfg.n_steps = 720;
    const auto stations = random_stations(3, 4);
    const auto obs = generate(cfg, stations);
    for (std::size_t n = 0; n < 3; ++n) {
        for (std::size_t t = cfg.alpha.size(); t < cfg.n_steps; ++t) {
            EXPECT_EQ(obs.values(t, n, 0), g_function(stations[n].coord, obs.timestamps[t], cfg));
        }
    }
}

TEST(Generate, RecurrenceReplay) {
    const auto cfg = ar_config(0.9, 5, 0.0, 17);
    const auto stations = random_stations(cfg.n_stations, 17);
    const auto obs = generate(cfg, stations);
    for (std::size_t n = 0; n < cfg.n_stations; ++n) {
        for (std::size_t t = 5; t < cfg.n_steps; ++t) {
            double v = g_function(stations[n].coord, obs.timestamps[t], cfg);
            for (std::size_t i = 1; i <= 5; ++i) v += cfg.alpha[i - 1] * obs.values(t - i, n, 0);
            EXPECT_NEAR(obs.values(t, n, 0), v, 1e-9);
        }
    }
}

TEST(Generate, WarmupIsRandomAndSeeded) {
    const auto cfg = ar_config(0.5, 8, 0.3, 5);
    const auto stations = random_stations(cfg.n_stations, 5);
    const auto a = generate(cfg, stations);
    const auto b = generate(cfg, stations);
    EXPECT_EQ(a.values, b.values);
    auto other = cfg;
    other.seed = 6;
    EXPECT_NE(generate(other, stations).values, a.values);
    EXPECT_NE(a.values(0, 0, 0), a.values(0, 1, 0));
}

TEST(Generate, PerStationStreamsIndependentOfStationCount) {
    auto cfg = ar_config(0.5, 4, 1.0, 9);
    const auto stations = random_stations(cfg.n_stations, 9);
    const auto full = generate(cfg, stations);
    cfg.n_stations = 2;
    const auto part = generate(cfg, {stations[0], stations[1]});
    for (std::size_t t = 0; t < cfg.n_steps; ++t) {
        EXPECT_EQ(part.values(t, 0, 0), full.values(t, 0, 0));
        EXPECT_EQ(part.values(t, 1, 0), full.values(t, 1, 0));
    }
}

TEST(Generate, BoundedUnderStableAlpha) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto cfg = ar_config(0.95, 12, 1.0, seed);
        cfg.n_steps = 5000;
        const auto obs = generate(cfg, random_stations(cfg.n_stations, seed));
        double max_abs = 0.0;
        for (double v : obs.values.values()) max_abs = std::max(max_abs, std::abs(v));
        // Stationary bound: |G| <= 1 + 1 + 3, amplified by 1 / (1 - 0.95), plus noise.
        EXPECT_LT(max_abs, 200.0) << "seed " << seed;
    }
}

TEST(Generate, Errors) {
    SynthConfig cfg;
    EXPECT_THROW((void)generate(cfg, random_stations(3, 1)), ConfigError);
    cfg.alpha.assign(48, 0.03);
    EXPECT_THROW((void)generate(cfg, random_stations(50, 1)), ConfigError);
}

TEST(Generate, CsvInterchange) {
    lwtest::TempDir dir;
    SynthConfig cfg;
    cfg.n_stations = 2;
    cfg.n_steps = 720;
    const auto stations = random_stations(2, 3);
    const auto obs = generate(cfg, stations);
    write_stations_csv(dir / "s.csv", stations);
    write_observations_csv(dir / "o.csv", obs);
    const auto loaded = load_observations_csv(dir / "o.csv", load_stations_csv(dir / "s.csv"));
    EXPECT_EQ(loaded.values, obs.values);
    EXPECT_EQ(loaded.variables, obs.variables);
}
