#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <string>

#include "lightweather/data.hpp"
#include "test_support.hpp"

using namespace lightweather;
using lwtest::TempDir;
using lwtest::write_text;

namespace {

std::string expect_ingestion_error(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const IngestionError& e) {
        EXPECT_EQ(e.category(), "ingestion error");
        return e.what();
    }
    ADD_FAILURE() << "expected IngestionError";
    return {};
}

const std::vector<Station> kTwoStations = {{"a", {0, 0, 0}}, {"b", {10, 20, 300}}};

}  // namespace

TEST(Stations, SingleStationAtOrigin) {
    TempDir dir;
    write_text(dir / "s.csv", "station_id,lat,lon,elev\ns1,0,0,0\n");
    const auto stations = load_stations_csv(dir / "s.csv");
    ASSERT_EQ(stations.size(), 1u);
    EXPECT_EQ(stations[0].id, "s1");
    EXPECT_EQ(stations[0].coord.latitude, 0.0);
    EXPECT_EQ(stations[0].coord.longitude, 0.0);
    EXPECT_EQ(stations[0].coord.elevation, 0.0);
}

TEST(Stations, LatitudeOutOfRangeNamesLine) {
    TempDir dir;
    write_text(dir / "s.csv", "station_id,lat,lon,elev\ns1,91,0,0\n");
    const auto msg = expect_ingestion_error([&] { (void)load_stations_csv(dir / "s.csv"); });
    EXPECT_NE(msg.find(":2:"), std::string::npos) << msg;
    EXPECT_NE(msg.find("range error"), std::string::npos) << msg;
}

TEST(Stations, MissingColumnAndBadNumber) {
    TempDir dir;
    write_text(dir / "a.csv", "station_id,lat,lon\ns1,0,0\n");
    EXPECT_NE(expect_ingestion_error([&] { (void)load_stations_csv(dir / "a.csv"); }).find("elev"), std::string::npos);
    write_text(dir / "b.csv", "station_id,lat,lon,elev\ns1,0,0,0\ns2,abc,0,0\n");
    EXPECT_NE(expect_ingestion_error([&] { (void)load_stations_csv(dir / "b.csv"); }).find(":3:"), std::string::npos);
    EXPECT_THROW((void)load_stations_csv(dir / "missing.csv"), IngestionError);
}

TEST(Stations, ColumnOrderFreeAndOrderPreserved) {
    TempDir dir;
    write_text(dir / "s.csv", "\xEF\xBB\xBFlon,elev,station_id,lat\r\n5,10,z,1\r\n6,20,y,2\r\n");
    const auto stations = load_stations_csv(dir / "s.csv");
    ASSERT_EQ(stations.size(), 2u);
    EXPECT_EQ(stations[0].id, "z");
    EXPECT_EQ(stations[1].coord.latitude, 2.0);
    EXPECT_EQ(stations[1].coord.longitude, 6.0);
}

TEST(Stations, ManyRows) {
    TempDir dir;
    const auto stations = random_stations(3850, 1);
    write_stations_csv(dir / "s.csv", stations);
    const auto loaded = load_stations_csv(dir / "s.csv");
    EXPECT_EQ(loaded.size(), 3850u);
    EXPECT_EQ(loaded, stations);
}

TEST(Observations, CompleteGrid) {
    TempDir dir;
    write_text(dir / "o.csv",
               "timestamp,station_id,var_0\n"
               "2020-01-01T00:00:00,a,1\n2020-01-01T00:00:00,b,2\n"
               "2020-01-01T01:00:00,a,3\n2020-01-01T01:00:00,b,4\n"
               "2020-01-01T02:00:00,a,5\n2020-01-01T02:00:00,b,6\n");
    const auto obs = load_observations_csv(dir / "o.csv", kTwoStations);
    EXPECT_EQ(obs.values.shape(), "3x2x1");
    EXPECT_EQ(obs.interval, std::chrono::seconds{3600});
    EXPECT_EQ(obs.values(2, 1, 0), 6.0);
    EXPECT_EQ(obs.values(1, 0, 0), 3.0);
}

TEST(Observations, ForwardFillsSingleGap) {
    TempDir dir;
    std::string text = "timestamp,station_id,var_0\n";
    for (int t = 0; t < 12; ++t) {
        const std::string ts = "2020-01-01T" + std::string(t < 10 ? "0" : "") + std::to_string(t) + ":00:00";
        text += ts + ",a," + (t == 5 ? std::string("NA") : std::to_string(t * 10)) + "\n";
        if (t != 7) text += ts + ",b," + std::to_string(t) + "\n";
    }
    write_text(dir / "o.csv", text);
    const auto obs = load_observations_csv(dir / "o.csv", kTwoStations);
    EXPECT_EQ(obs.values(5, 0, 0), 40.0);  // explicit missing token
    EXPECT_EQ(obs.values(7, 1, 0), 6.0);   // absent row
    EXPECT_EQ(obs.values(8, 1, 0), 8.0);
}

TEST(Observations, LeadingGapTakesFirstObservation) {
    TempDir dir;
    std::string text = "timestamp,station_id,var_0\n";
    for (int t = 0; t < 12; ++t) {
        const std::string ts = "2020-01-01T" + std::string(t < 10 ? "0" : "") + std::to_string(t) + ":00";
        text += ts + ",a," + std::to_string(t) + "\n";
        text += ts + ",b," + (t == 0 ? std::string("") : std::to_string(100 + t)) + "\n";
    }
    write_text(dir / "o.csv", text);
    const auto obs = load_observations_csv(dir / "o.csv", kTwoStations);
    EXPECT_EQ(obs.values(0, 1, 0), 101.0);
}

TEST(Observations, OutOfOrderRowsGiveSameTensor) {
    TempDir dir;
    write_text(dir / "sorted.csv",
               "timestamp,station_id,var_0,var_1\n"
               "2020-01-01,a,1,-1\n2020-01-01,b,2,-2\n2020-01-02,a,3,-3\n2020-01-02,b,4,-4\n");
    write_text(dir / "shuffled.csv",
               "timestamp,station_id,var_0,var_1\n"
               "2020-01-02,b,4,-4\n2020-01-01,b,2,-2\n2020-01-02,a,3,-3\n2020-01-01,a,1,-1\n");
    const auto a = load_observations_csv(dir / "sorted.csv", kTwoStations);
    const auto b = load_observations_csv(dir / "shuffled.csv", kTwoStations);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.timestamps, b.timestamps);
    EXPECT_EQ(a.interval, std::chrono::seconds{86400});
    EXPECT_EQ(a.variables, (std::vector<std::string>{"var_0", "var_1"}));
}

TEST(Observations, Errors) {
    TempDir dir;
    write_text(dir / "unknown.csv", "timestamp,station_id,var_0\n2020-01-01,zz,1\n");
    EXPECT_NE(expect_ingestion_error([&] { (void)load_observations_csv(dir / "unknown.csv", kTwoStations); })
                  .find("unknown station"),
              std::string::npos);

    write_text(dir / "grid.csv",
               "timestamp,station_id,var_0\n2020-01-01T00:00,a,1\n2020-01-01T01:00,a,1\n2020-01-01T03:00,a,1\n");
    EXPECT_NE(expect_ingestion_error([&] { (void)load_observations_csv(dir / "grid.csv", {kTwoStations[0]}); })
                  .find("non-uniform"),
              std::string::npos);

    write_text(dir / "dup.csv", "timestamp,station_id,var_0\n2020-01-01,a,1\n2020-01-01,a,2\n");
    EXPECT_NE(expect_ingestion_error([&] { (void)load_observations_csv(dir / "dup.csv", {kTwoStations[0]}); })
                  .find("duplicate"),
              std::string::npos);

    std::string sparse = "timestamp,station_id,var_0\n";
    for (int t = 1; t <= 10; ++t) {
        const std::string ts = "2020-01-" + std::string(t < 10 ? "0" : "") + std::to_string(t);
        sparse += ts + ",a,1\n";
        if (t > 2) sparse += ts + ",b,1\n";
    }
    write_text(dir / "sparse.csv", sparse);
    EXPECT_NE(expect_ingestion_error([&] { (void)load_observations_csv(dir / "sparse.csv", kTwoStations); })
                  .find("more than 10%"),
              std::string::npos);

    write_text(dir / "header.csv", "time,station,var_0\n2020-01-01,a,1\n");
    (void)expect_ingestion_error([&] { (void)load_observations_csv(dir / "header.csv", kTwoStations); });
}

TEST(Observations, ExactlyTenPercentMissingAccepted) {
    TempDir dir;
    std::string text = "timestamp,station_id,var_0\n";
    for (int t = 1; t <= 10; ++t) {
        const std::string ts = "2020-01-" + std::string(t < 10 ? "0" : "") + std::to_string(t);
        text += ts + ",a," + std::to_string(t) + "\n";
        if (t != 4) text += ts + ",b," + std::to_string(t) + "\n";
    }
    write_text(dir / "o.csv", text);
    EXPECT_NO_THROW((void)load_observations_csv(dir / "o.csv", kTwoStations));
}

TEST(Observations, IngestionIsIdempotentAndRoundTrips) {
    TempDir dir;
    const auto obs = lwtest::small_synthetic(3, 80, 4, 4);
    write_stations_csv(dir / "s.csv", obs.stations);
    write_observations_csv(dir / "o.csv", obs);
    const auto stations = load_stations_csv(dir / "s.csv");
    const auto a = load_observations_csv(dir / "o.csv", stations);
    const auto b = load_observations_csv(dir / "o.csv", stations);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.values, obs.values);
    EXPECT_EQ(a.timestamps, obs.timestamps);
}

TEST(Split, GlobalWindLength) {
    const auto s = chronological_split(17544, 48, 24);
    EXPECT_EQ(s.train.size(), 12280u);
    EXPECT_EQ(s.val.size(), 1754u);
    EXPECT_EQ(s.test.size(), 3510u);
}

TEST(Split, TenSteps) {
    const auto s = chronological_split(10, 0, 0);
    EXPECT_EQ(s.train, (IndexRange{0, 7}));
    EXPECT_EQ(s.val, (IndexRange{7, 8}));
    EXPECT_EQ(s.test, (IndexRange{8, 10}));
}

TEST(Split, PartitionAndTooShort) {
    for (std::size_t total : {720u, 1001u, 4567u, 17544u}) {
        const auto s = chronological_split(total, 48, 24);
        EXPECT_EQ(s.train.begin, 0u);
        EXPECT_EQ(s.train.end, s.val.begin);
        EXPECT_EQ(s.val.end, s.test.begin);
        EXPECT_EQ(s.test.end, total);
    }
    try {
        (void)chronological_split(500, 48, 24);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.category(), "config error");
    }
}

TEST(Windows, CountFormula) {
    const auto obs = lwtest::small_synthetic(1, 400, 4, 4);
    EXPECT_EQ(make_windows(obs, {0, 100}, 48, 24).size(), 29u);
    EXPECT_EQ(make_windows(obs, {10, 82}, 48, 24).size(), 1u);
    EXPECT_EQ(make_windows(obs, {10, 81}, 48, 24).size(), 0u);
    for (std::size_t len = 3; len < 60; ++len) {
        for (std::size_t th = 1; th < 6; ++th) {
            for (std::size_t tf = 1; tf < 6; ++tf) {
                if (len < th + tf) continue;
                EXPECT_EQ(make_windows(obs, {0, len}, th, tf).size(), len - th - tf + 1);
            }
        }
    }
}

TEST(Windows, ContiguousStrideOneAndTimeFeature) {
    const auto obs = lwtest::small_synthetic(2, 400, 4, 4);
    const auto view = make_windows(obs, {100, 200}, 6, 3);
    const auto w0 = view[0];
    const auto w1 = view[1];
    for (std::size_t k = 0; k + 1 < 6; ++k) EXPECT_EQ(w1.history(k, 1, 0), w0.history(k + 1, 1, 0));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(w0.future(k, 0, 0), obs.values(106 + k, 0, 0));
    EXPECT_EQ(w0.history(5, 0, 0), obs.values(105, 0, 0));
    EXPECT_EQ(w0.time_feature, time_feature(obs.timestamps[106]));
    EXPECT_EQ(w0.first_forecast, obs.timestamps[106]);
}

TEST(Windows, NoLeakageAcrossSplits) {
    const auto obs = lwtest::small_synthetic(1, 1000, 4, 4);
    const auto s = chronological_split(1000, 48, 24);
    const auto train = make_windows(obs, s.train, 48, 24);
    const auto val = make_windows(obs, s.val, 48, 24);
    EXPECT_LE(train.forecast_start(train.size() - 1) + 24, s.val.begin);
    EXPECT_GE(val.history_start(0), s.val.begin);
    EXPECT_LE(val.forecast_start(val.size() - 1) + 24, s.test.begin);
}

TEST(Normalizer, HandZScore) {
    Tensor3 v(2, 1, 1);
    v(0, 0, 0) = 0.0;
    v(1, 0, 0) = 2.0;
    const auto n = Normalizer::fit(v, {0, 2});
    EXPECT_DOUBLE_EQ(n.mean()[0], 1.0);
    EXPECT_DOUBLE_EQ(n.stddev()[0], 1.0);
    EXPECT_DOUBLE_EQ(n.apply(0, 2.0), 1.0);
}

TEST(Normalizer, FitsOnTrainOnlyAndInverts) {
    auto v = lwtest::random_tensor(100, 3, 2, 5);
    for (double& x : v.values()) x = 1e3 + 7.0 * x;
    for (std::size_t t = 70; t < 100; ++t) v(t, 0, 0) = 1e9;  // outside train
    const auto n = Normalizer::fit(v, {0, 70});
    EXPECT_LT(n.mean()[0], 2e3);
    const auto back = n.invert(n.apply(v));
    for (std::size_t i = 0; i < v.values().size(); ++i) {
        EXPECT_NEAR(back.values()[i], v.values()[i], 1e-6 * std::abs(v.values()[i]));
    }
}

TEST(Normalizer, DegenerateVariable) {
    Tensor3 v(10, 2, 1, 3.0);
    v(0, 0, 0) = 4.0;
    try {
        (void)Normalizer::fit(v, {0, 10}, {"temp"});
    } catch (const DegenerateVariableError& e) {
        FAIL() << "variance is not zero here: " << e.what();
    }
    Tensor3 flat(10, 2, 1, 3.0);
    try {
        (void)Normalizer::fit(flat, {0, 10}, {"temp"});
        FAIL() << "expected DegenerateVariableError";
    } catch (const DegenerateVariableError& e) {
        EXPECT_EQ(e.category(), "degenerate-variable error");
        EXPECT_NE(std::string(e.what()).find("temp"), std::string::npos);
    }
}

TEST(Normalizer, MseScalesWithVariance) {
    auto truth = lwtest::random_tensor(50, 2, 1, 8);
    auto pred = lwtest::random_tensor(50, 2, 1, 9);
    for (double& x : truth.values()) x = 5.0 + 3.0 * x;
    for (double& x : pred.values()) x = 5.0 + 3.0 * x;
    const auto n = Normalizer::fit(truth, {0, 50});
    double mse_raw = 0.0;
    double mse_norm = 0.0;
    const auto zt = n.apply(truth);
    const auto zp = n.apply(pred);
    for (std::size_t i = 0; i < truth.values().size(); ++i) {
        mse_raw += std::pow(pred.values()[i] - truth.values()[i], 2);
        mse_norm += std::pow(zp.values()[i] - zt.values()[i], 2);
    }
    const double s = n.stddev()[0];
    EXPECT_NEAR(mse_raw / mse_norm, s * s, 1e-9 * s * s);
}

TEST(ForecastCsv, RoundTrip) {
    TempDir dir;
    const std::vector<ForecastRow> rows = {{"a", 1, "var_0", 0.1}, {"a", 2, "var_0", -3.25}, {"b", 1, "var_0", 1e-300}};
    write_forecast_csv(dir / "f.csv", rows);
    EXPECT_EQ(load_forecast_csv(dir / "f.csv"), rows);
}

TEST(Csv, ShortestRoundTripFormatting) {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125}) {
        EXPECT_EQ(csv::parse_double(csv::format_double(v)).value(), v);
    }
    EXPECT_TRUE(csv::is_missing_token("NaN"));
    EXPECT_TRUE(csv::is_missing_token(""));
    EXPECT_FALSE(csv::is_missing_token("0"));
}
