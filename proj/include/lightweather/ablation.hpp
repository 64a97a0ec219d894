#pragma once

// Historical-inertia baseline and the encoding ablation grid
// (spatial: abs/rel/none x temporal: abs/none).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/training.hpp"

namespace lightweather {

/// Copies the most recent T_f history steps forward: output step k equals
/// history step T_h - T_f + k.
inline Tensor3 hi_forecast(const Tensor3& history, std::size_t horizon_len) {
    if (horizon_len > history.steps()) {
        throw ConfigError("historical inertia needs T_f <= T_h (got T_f=" + std::to_string(horizon_len) +
                          ", T_h=" + std::to_string(history.steps()) + ")");
    }
    Tensor3 out(horizon_len, history.stations(), history.variables());
    const std::size_t offset = history.steps() - horizon_len;
    for (std::size_t k = 0; k < horizon_len; ++k) {
        for (std::size_t n = 0; n < history.stations(); ++n) {
            for (std::size_t c = 0; c < history.variables(); ++c) out(k, n, c) = history(offset + k, n, c);
        }
    }
    return out;
}

/// Pooled HI metrics over every window of `range`, computed on raw values.
inline Metrics evaluate_hi(const ObservationSet& obs, IndexRange range, std::size_t history_len,
                           std::size_t horizon_len) {
    if (horizon_len > history_len) {
        throw ConfigError("historical inertia needs T_f <= T_h");
    }
    const auto view = make_windows(obs, range, history_len, horizon_len);
    if (view.size() == 0) throw EvaluationError("split has no complete window");
    const auto& v = obs.values;
    MetricsAccumulator acc;
    for (std::size_t w = 0; w < view.size(); ++w) {
        const std::size_t f0 = view.forecast_start(w);
        for (std::size_t k = 0; k < horizon_len; ++k) {
            for (std::size_t n = 0; n < v.stations(); ++n) {
                for (std::size_t c = 0; c < v.variables(); ++c) {
                    acc.add(v(f0 - horizon_len + k, n, c) - v(f0 + k, n, c));
                }
            }
        }
    }
    return acc.result();
}

struct AblationSpec {
    SpatialEncoding spatial = SpatialEncoding::absolute;
    TemporalEncoding temporal = TemporalEncoding::absolute;

    [[nodiscard]] std::string label() const { return to_string(spatial) + "/" + to_string(temporal); }
    friend bool operator==(const AblationSpec&, const AblationSpec&) = default;
};

/// The four rows of the ablation table, in report order.
inline std::vector<AblationSpec> ablation_specs() {
    return {{SpatialEncoding::none, TemporalEncoding::absolute},
            {SpatialEncoding::absolute, TemporalEncoding::none},
            {SpatialEncoding::relative, TemporalEncoding::absolute},
            {SpatialEncoding::absolute, TemporalEncoding::absolute}};
}

/// Model config for `spec`. Relative spatial encoding needs `num_stations` > 0.
inline ModelConfig variant_config(const AblationSpec& spec, ModelConfig base, int num_stations) {
    base.spatial = spec.spatial;
    base.temporal = spec.temporal;
    base.num_stations = spec.spatial == SpatialEncoding::relative ? num_stations : 0;
    if (spec.spatial == SpatialEncoding::relative && num_stations < 1) {
        throw ConfigError("relative spatial encoding requires a known, fixed station count");
    }
    base.validate();
    return base;
}

inline ModelParams build_variant(const AblationSpec& spec, const ModelConfig& base, int num_stations,
                                 std::uint64_t seed) {
    return init_params(variant_config(spec, base, num_stations), seed);
}

struct AblationRun {
    AblationSpec spec;
    std::uint64_t seed = 0;
    Metrics test;
};

struct AblationSummary {
    AblationSpec spec;
    double mean_mse = 0.0;
    double mean_mae = 0.0;
    std::size_t runs = 0;
};

/// Trains and tests every spec for every seed. The seed drives both the
/// initialization and the batch order.
inline std::vector<AblationRun> run_ablation_suite(const PreparedData& data, const ModelConfig& base,
                                                   const TrainConfig& train, const std::vector<std::uint64_t>& seeds,
                                                   const std::vector<AblationSpec>& specs = ablation_specs()) {
    if (seeds.size() < 3) throw ConfigError("ablation suite needs at least 3 seeds");
    std::vector<AblationRun> runs;
    for (const auto& spec : specs) {
        for (std::uint64_t seed : seeds) {
            try {
                TrainConfig cfg = train;
                cfg.seed = seed;
                const auto params = build_variant(spec, base, static_cast<int>(data.obs.num_stations()), seed);
                const auto fitted = fit(params, data, cfg);
                runs.push_back({spec, seed, evaluate(fitted.best, data, data.splits.test)});
            } catch (const Error& e) {
                throw TrainingError("ablation " + spec.label() + " seed " + std::to_string(seed) + ": " + e.what());
            }
        }
    }
    return runs;
}

inline std::vector<AblationSummary> summarize(const std::vector<AblationRun>& runs) {
    std::vector<AblationSummary> out;
    for (const auto& r : runs) {
        auto it = std::find_if(out.begin(), out.end(), [&](const AblationSummary& s) { return s.spec == r.spec; });
        if (it == out.end()) {
            out.push_back({r.spec, 0.0, 0.0, 0});
            it = out.end() - 1;
        }
        it->mean_mse += r.test.mse;
        it->mean_mae += r.test.mae;
        ++it->runs;
    }
    for (auto& s : out) {
        s.mean_mse /= static_cast<double>(s.runs);
        s.mean_mae /= static_cast<double>(s.runs);
    }
    return out;
}

/// `spatial,temporal,seed,mse,mae`, one row per run.
inline void write_ablation_csv(const std::filesystem::path& path, const std::vector<AblationRun>& runs) {
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write '" + path.string() + "'");
    out << "spatial,temporal,seed,mse,mae\n";
    for (const auto& r : runs) {
        out << to_string(r.spec.spatial) << ',' << to_string(r.spec.temporal) << ',' << r.seed << ','
            << csv::format_double(r.test.mse) << ',' << csv::format_double(r.test.mae) << '\n';
    }
}

inline std::vector<AblationRun> load_ablation_csv(const std::filesystem::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line) ||
        csv::split(line) != std::vector<std::string>{"spatial", "temporal", "seed", "mse", "mae"}) {
        reader.fail("expected header spatial,temporal,seed,mse,mae");
    }
    std::vector<AblationRun> runs;
    while (reader.next(line)) {
        const auto f = csv::split(line);
        if (f.size() != 5) reader.fail("expected 5 fields");
        AblationRun r;
        r.spec = {parse_spatial_encoding(f[0]), parse_temporal_encoding(f[1])};
        r.seed = std::stoull(f[2]);
        const auto mse = csv::parse_double(f[3]);
        const auto mae = csv::parse_double(f[4]);
        if (!mse || !mae) reader.fail("unparsable metric");
        r.test = {*mse, *mae, 0};
        runs.push_back(r);
    }
    return runs;
}

}  // namespace lightweather
