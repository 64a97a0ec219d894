#pragma once

// Synthetic station data with known dynamics:
//
//   v[tau] = sum_i alpha_i * v[tau - i] + G(lon, lat, elev, tau) + noise
//
// G is a latitude-modulated diurnal harmonic whose phase follows longitude, an
// annual harmonic and an elevation offset, so hour/month tables and all three
// coordinates carry signal.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "lightweather/calendar.hpp"
#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"

namespace lightweather {

struct SynthConfig {
    std::size_t n_stations = 50;
    std::size_t n_steps = 2000;
    std::chrono::seconds interval{3600};
    std::vector<double> alpha = std::vector<double>(48, 0.0);  // AR coefficients, lag 1 first
    std::size_t horizon_len = 24;
    double amp_diurnal = 1.0;
    double amp_annual = 1.0;
    double amp_elev = 1.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
    Timestamp start = std::chrono::sys_days{std::chrono::year{2019} / 1 / 1};

    [[nodiscard]] std::size_t history_len() const noexcept { return alpha.size(); }

    void validate() const {
        if (n_stations < 1) throw ConfigError("synthetic config needs at least one station");
        if (alpha.empty()) throw ConfigError("synthetic config needs at least one AR coefficient");
        double total = 0.0;
        for (double a : alpha) total += std::abs(a);
        if (!(total < 1.0)) {
            throw ConfigError("unstable alpha: sum |alpha_i| = " + std::to_string(total) + " must be < 1");
        }
        const std::size_t need = 10 * (alpha.size() + horizon_len);
        if (n_steps < need) {
            throw ConfigError("n_steps = " + std::to_string(n_steps) + " below 10*(T_h+T_f) = " + std::to_string(need));
        }
        if (interval.count() <= 0) throw ConfigError("interval must be positive");
        if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");
    }
};

/// SplitMix64 finalizer, used to derive independent per-station streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t station_stream_seed(std::uint64_t seed, std::size_t station) {
    return mix_seed(mix_seed(seed) ^ mix_seed(0xA5A5A5A5ULL + station));
}

/// Spatio-temporal forcing term. `hour` is the fractional hour of day and the
/// annual phase uses the 1-based day of year.
inline double g_function(const StationCoord& coord, Timestamp ts, const SynthConfig& cfg) {
    constexpr double pi = std::numbers::pi;
    const double hour = hour_of_day(ts);
    const double doy = static_cast<double>(day_of_year(ts));
    const double diurnal =
        std::sin(2.0 * pi * hour / 24.0 + coord.longitude * pi / 180.0) * std::cos(coord.latitude * pi / 180.0);
    const double annual = std::sin(2.0 * pi * doy / 365.25);
    return cfg.amp_diurnal * diurnal + cfg.amp_annual * annual + cfg.amp_elev * (coord.elevation / 1000.0);
}

/// Random station table with ids s0000, s0001, ...
inline std::vector<Station> random_stations(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed ^ 0x5354415449ULL));
    std::uniform_real_distribution<double> lat(-80.0, 80.0);
    std::uniform_real_distribution<double> lon(-180.0, 180.0);
    std::uniform_real_distribution<double> elev(0.0, 3000.0);
    std::vector<Station> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string id = std::to_string(i);
        if (id.size() < 4) id.insert(0, 4 - id.size(), '0');
        id.insert(0, "s");
        const double a = lat(rng);
        const double b = lon(rng);
        const double c = elev(rng);
        out.push_back({id, {a, b, c}});
    }
    return out;
}

/// Runs the recurrence for every station. The first T_h values of each station
/// are standard-normal warm-up draws. Stations use independent RNG streams
/// derived from (seed, station index).
inline ObservationSet generate(const SynthConfig& cfg, const std::vector<Station>& stations) {
    cfg.validate();
    if (stations.size() != cfg.n_stations) {
        throw ConfigError("synthetic config expects " + std::to_string(cfg.n_stations) + " stations, got " +
                          std::to_string(stations.size()));
    }
    for (const auto& s : stations) validate(s.coord);

    ObservationSet obs;
    obs.interval = cfg.interval;
    obs.stations = stations;
    obs.variables = {"var_0"};
    obs.timestamps.reserve(cfg.n_steps);
    for (std::size_t t = 0; t < cfg.n_steps; ++t) {
        obs.timestamps.push_back(cfg.start + cfg.interval * static_cast<long long>(t));
    }
    obs.values = Tensor3(cfg.n_steps, stations.size(), 1);

    const std::size_t order = cfg.alpha.size();
    for (std::size_t n = 0; n < stations.size(); ++n) {
        std::mt19937_64 rng(station_stream_seed(cfg.seed, n));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t t = 0; t < cfg.n_steps; ++t) {
            if (t < order) {
                obs.values(t, n, 0) = gauss(rng);
                continue;
            }
            double v = 0.0;
            for (std::size_t i = 1; i <= order; ++i) v += cfg.alpha[i - 1] * obs.values(t - i, n, 0);
            v += g_function(stations[n].coord, obs.timestamps[t], cfg);
            v += cfg.noise_std * gauss(rng);
            obs.values(t, n, 0) = v;
        }
    }
    return obs;
}

}  // namespace lightweather
