#pragma once

// The command implementations behind tools/lightweather. Each command reads a
// RunConfig, validates everything it needs, and only then touches out_dir.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lightweather/ablation.hpp"
#include "lightweather/checkpoint.hpp"
#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/run_config.hpp"
#include "lightweather/synthetic.hpp"
#include "lightweather/training.hpp"

namespace lightweather {

namespace fs = std::filesystem;

enum class ExitCode : int { ok = 0, config = 1, ingestion = 2, training = 3, evaluation = 4 };

inline ExitCode exit_code_for(const Error& e) {
    const std::string& c = e.category();
    if (c == "ingestion error" || c == "degenerate-variable error") return ExitCode::ingestion;
    if (c == "training error" || c == "optimizer error") return ExitCode::training;
    if (c == "evaluation error" || c == "checkpoint error") return ExitCode::evaluation;
    return ExitCode::config;
}

/// Single-line, machine-parsable error report.
inline std::string error_line(const std::string& category, std::string message) {
    for (char& ch : message) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return "error: " + category + ": " + message;
}

namespace detail {

inline fs::path require_out_dir(const RunConfig& cfg) {
    const auto out = cfg.get("out_dir");
    if (!out || out->empty()) throw ConfigError("out_dir is not set");
    if (fs::exists(*out) && !fs::is_directory(*out)) throw ConfigError("out_dir '" + *out + "' is not a directory");
    return *out;
}

inline fs::path require_input(const RunConfig& cfg, const std::string& key) {
    const auto p = cfg.get(key);
    if (!p || p->empty()) throw ConfigError(key + " is not set");
    if (!fs::is_regular_file(*p)) throw IngestionError(key + " '" + *p + "' does not exist");
    return *p;
}

inline fs::path checkpoint_path(const RunConfig& cfg, bool must_exist) {
    fs::path p;
    if (const auto c = cfg.get("checkpoint"); c && !c->empty()) {
        p = *c;
    } else {
        p = require_out_dir(cfg) / "model.lwckpt";
    }
    if (must_exist && !fs::is_regular_file(p)) throw CheckpointError("checkpoint '" + p.string() + "' does not exist");
    return p;
}

inline IndexRange split_by_name(const SplitRanges& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw ConfigError("eval_split must be train, val or test");
}

inline void make_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create out_dir '" + dir.string() + "': " + ec.message());
}

struct DataPaths {
    fs::path stations;
    fs::path observations;
};

inline DataPaths require_data(const RunConfig& cfg) {
    return {require_input(cfg, "stations_csv"), require_input(cfg, "observations_csv")};
}

inline ObservationSet load_data(const DataPaths& paths) {
    const auto stations = load_stations_csv(paths.stations);
    return load_observations_csv(paths.observations, stations);
}

inline PreparedData prepare(const RunConfig& cfg, ObservationSet obs) {
    const auto m = model_config(cfg);
    return prepare_data(std::move(obs), static_cast<std::size_t>(m.history_len),
                        static_cast<std::size_t>(m.horizon_len), cfg.get_bool("normalize", true));
}

/// Six significant digits for console tables; CSV files keep full precision.
inline std::string table_double(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

inline void print_metrics_row(std::ostream& out, const std::string& label, const Metrics& m) {
    out << std::left << std::setw(14) << label << std::right << std::setw(14) << table_double(m.mse)
        << std::setw(14) << table_double(m.mae) << std::setw(12) << m.n_points << '\n';
}

}  // namespace detail

inline void cmd_ingest_check(const RunConfig& cfg, std::ostream& out) {
    const auto paths = detail::require_data(cfg);
    const auto m = model_config(cfg);
    const auto obs = detail::load_data(paths);
    out << "stations: " << obs.num_stations() << '\n'
        << "steps: " << obs.num_steps() << '\n'
        << "variables: " << obs.num_variables() << '\n'
        << "interval_seconds: " << obs.interval.count() << '\n';
    if (obs.num_steps() > 0) {
        out << "first: " << format_timestamp(obs.timestamps.front()) << '\n'
            << "last: " << format_timestamp(obs.timestamps.back()) << '\n';
    }
    const auto th = static_cast<std::size_t>(m.history_len);
    const auto tf = static_cast<std::size_t>(m.horizon_len);
    const auto splits = chronological_split(obs.num_steps(), th, tf);
    auto windows = [&](IndexRange r) { return r.size() + 1 - th - tf; };
    out << "train: " << splits.train.size() << " steps, " << windows(splits.train) << " windows\n"
        << "val: " << splits.val.size() << " steps, " << windows(splits.val) << " windows\n"
        << "test: " << splits.test.size() << " steps, " << windows(splits.test) << " windows\n";
}

inline void cmd_synth(const RunConfig& cfg, std::ostream& out) {
    const auto sc = synth_config(cfg);
    const auto dir = detail::require_out_dir(cfg);
    const auto stations = random_stations(sc.n_stations, sc.seed);
    const auto obs = generate(sc, stations);

    detail::make_out_dir(dir);
    write_stations_csv(dir / "stations.csv", stations);
    write_observations_csv(dir / "observations.csv", obs);
    std::ofstream meta(dir / "synth_meta.txt");
    if (!meta) throw IngestionError("cannot write '" + (dir / "synth_meta.txt").string() + "'");
    meta << "seed = " << sc.seed << '\n'
         << "synth_stations = " << sc.n_stations << '\n'
         << "synth_steps = " << sc.n_steps << '\n'
         << "synth_interval = " << (sc.interval == std::chrono::seconds{86400} ? "day" : "hour") << '\n'
         << "synth_amp_diurnal = " << csv::format_double(sc.amp_diurnal) << '\n'
         << "synth_amp_annual = " << csv::format_double(sc.amp_annual) << '\n'
         << "synth_amp_elev = " << csv::format_double(sc.amp_elev) << '\n'
         << "synth_noise_std = " << csv::format_double(sc.noise_std) << '\n'
         << "synth_start = " << format_timestamp(sc.start) << '\n'
         << "synth_alpha = ";
    for (std::size_t i = 0; i < sc.alpha.size(); ++i) meta << (i ? "," : "") << csv::format_double(sc.alpha[i]);
    meta << '\n';
    out << "wrote " << sc.n_stations << " stations x " << sc.n_steps << " steps to " << dir.string() << '\n';
}

inline void cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto paths = detail::require_data(cfg);
    const auto tc = train_config(cfg);
    const auto dtype = checkpoint_dtype(cfg);
    const auto dir = detail::require_out_dir(cfg);
    const auto ckpt = detail::checkpoint_path(cfg, false);
    model_config(cfg, 1).validate();

    auto data = detail::prepare(cfg, detail::load_data(paths));
    const auto mc = model_config(cfg, static_cast<int>(data.obs.num_stations()));
    mc.validate();

    detail::make_out_dir(dir);
    const auto result = fit(init_params(mc, tc.seed), data, tc, [&](const EpochRecord& r) {
        out << "epoch " << r.epoch << " train_mae " << csv::format_double(r.train_mae) << " val_mae "
            << csv::format_double(r.val_mae) << '\n';
    });
    try {
        save_checkpoint(ckpt, result.best, dtype);
        write_history_csv(dir / "history.csv", result.history);
    } catch (const Error& e) {
        throw TrainingError(e.what());
    }
    out << "best epoch " << result.best_epoch << " val_mae " << csv::format_double(result.best_val_mae) << '\n'
        << "checkpoint " << ckpt.string() << '\n';
}

inline void cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const auto paths = detail::require_data(cfg);
    const auto ckpt = detail::checkpoint_path(cfg, true);
    const auto dir = detail::require_out_dir(cfg);
    const auto split_name = cfg.get_string("eval_split", "test");
    model_config(cfg, 1).validate();

    auto data = detail::prepare(cfg, detail::load_data(paths));
    const auto mc = model_config(cfg, static_cast<int>(data.obs.num_stations()));
    const auto range = detail::split_by_name(data.splits, split_name);
    const auto params = load_checkpoint(ckpt, mc);
    const Metrics model = evaluate(params, data, range);
    const Metrics hi = evaluate_hi(data.obs, range, data.history_len, data.horizon_len);

    detail::make_out_dir(dir);
    const auto path = dir / "metrics.csv";
    std::ofstream csv_out(path);
    if (!csv_out) throw EvaluationError("cannot write '" + path.string() + "'");
    csv_out << "model,split,mse,mae,n_points\n";
    csv_out << "lightweather," << split_name << ',' << csv::format_double(model.mse) << ','
            << csv::format_double(model.mae) << ',' << model.n_points << '\n';
    csv_out << "hi," << split_name << ',' << csv::format_double(hi.mse) << ',' << csv::format_double(hi.mae) << ','
            << hi.n_points << '\n';

    out << std::left << std::setw(14) << "model" << std::right << std::setw(14) << "mse" << std::setw(14) << "mae"
        << std::setw(12) << "points" << '\n';
    detail::print_metrics_row(out, "lightweather", model);
    detail::print_metrics_row(out, "hi", hi);
}

struct MetricsRow {
    std::string model;
    std::string split;
    Metrics metrics;
};

inline std::vector<MetricsRow> load_metrics_csv(const fs::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line) ||
        csv::split(line) != std::vector<std::string>{"model", "split", "mse", "mae", "n_points"}) {
        reader.fail("expected header model,split,mse,mae,n_points");
    }
    std::vector<MetricsRow> rows;
    while (reader.next(line)) {
        const auto f = csv::split(line);
        if (f.size() != 5) reader.fail("expected 5 fields");
        const auto mse = csv::parse_double(f[2]);
        const auto mae = csv::parse_double(f[3]);
        const auto n = csv::parse_double(f[4]);
        if (!mse || !mae || !n) reader.fail("unparsable metrics row");
        rows.push_back({f[0], f[1], {*mse, *mae, static_cast<std::size_t>(*n)}});
    }
    return rows;
}

/// Forecast for the window whose first forecast step is `timestamp`.
inline std::vector<ForecastRow> forecast_rows(const ModelParams& params, const PreparedData& data,
                                              Timestamp timestamp) {
    const auto idx = data.obs.index_of(timestamp);
    if (!idx) {
        throw ValidationError("timestamp " + format_timestamp(timestamp) + " is not on the observation grid");
    }
    if (*idx < data.history_len) {
        throw ValidationError("timestamp " + format_timestamp(timestamp) + " has fewer than " +
                              std::to_string(data.history_len) + " history steps before it");
    }
    const Tensor3 pred = predict_at(params, data, *idx);
    std::vector<ForecastRow> rows;
    rows.reserve(pred.values().size());
    for (std::size_t n = 0; n < pred.stations(); ++n) {
        for (std::size_t k = 0; k < pred.steps(); ++k) {
            for (std::size_t c = 0; c < pred.variables(); ++c) {
                rows.push_back({data.obs.stations[n].id, static_cast<int>(k + 1), data.obs.variables[c], pred(k, n, c)});
            }
        }
    }
    return rows;
}

inline void cmd_forecast(const RunConfig& cfg, std::ostream& out) {
    const auto paths = detail::require_data(cfg);
    const auto ckpt = detail::checkpoint_path(cfg, true);
    const auto dir = detail::require_out_dir(cfg);
    const auto ts_text = cfg.get("forecast_timestamp");
    if (!ts_text) throw ConfigError("forecast needs --timestamp or forecast_timestamp");
    const auto ts = parse_timestamp(*ts_text);
    model_config(cfg, 1).validate();

    auto data = detail::prepare(cfg, detail::load_data(paths));
    const auto mc = model_config(cfg, static_cast<int>(data.obs.num_stations()));
    const auto params = load_checkpoint(ckpt, mc);
    const auto rows = forecast_rows(params, data, ts);

    detail::make_out_dir(dir);
    write_forecast_csv(dir / "forecast.csv", rows);
    out << "wrote " << rows.size() << " rows to " << (dir / "forecast.csv").string() << '\n';
}

inline void cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    const auto paths = detail::require_data(cfg);
    const auto tc = train_config(cfg);
    const auto seeds = ablation_seeds(cfg);
    const auto dir = detail::require_out_dir(cfg);
    const auto base = model_config(cfg);

    auto data = detail::prepare(cfg, detail::load_data(paths));
    detail::make_out_dir(dir);
    const auto runs = run_ablation_suite(data, base, tc, seeds);
    write_ablation_csv(dir / "ablation.csv", runs);

    out << std::left << std::setw(6) << "exp" << std::setw(10) << "spatial" << std::setw(10) << "temporal"
        << std::right << std::setw(14) << "mse" << std::setw(14) << "mae" << '\n';
    int exp = 1;
    for (const auto& s : summarize(runs)) {
        out << std::left << std::setw(6) << exp++ << std::setw(10) << to_string(s.spec.spatial) << std::setw(10)
            << to_string(s.spec.temporal) << std::right << std::setw(14) << detail::table_double(s.mean_mse)
            << std::setw(14) << detail::table_double(s.mean_mae) << '\n';
    }
}

struct SweepRow {
    int d = 0;
    int layers = 0;
    double val_mse = std::numeric_limits<double>::quiet_NaN();
    double val_mae = std::numeric_limits<double>::quiet_NaN();
    std::size_t params = 0;
    double epoch_seconds = std::numeric_limits<double>::quiet_NaN();
};

inline void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write '" + path.string() + "'");
    out << "d,L,val_mse,val_mae,params,epoch_seconds\n";
    for (const auto& r : rows) {
        out << r.d << ',' << r.layers << ',' << csv::format_double(r.val_mse) << ',' << csv::format_double(r.val_mae)
            << ',' << r.params << ',' << csv::format_double(r.epoch_seconds) << '\n';
    }
}

inline std::vector<SweepRow> load_sweep_csv(const fs::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line) ||
        csv::split(line) != std::vector<std::string>{"d", "L", "val_mse", "val_mae", "params", "epoch_seconds"}) {
        reader.fail("expected header d,L,val_mse,val_mae,params,epoch_seconds");
    }
    std::vector<SweepRow> rows;
    while (reader.next(line)) {
        const auto f = csv::split(line);
        if (f.size() != 6) reader.fail("expected 6 fields");
        std::vector<double> v;
        for (const auto& s : f) {
            const auto x = csv::parse_double(s);
            if (!x) reader.fail("unparsable sweep row");
            v.push_back(*x);
        }
        rows.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), v[2], v[3], static_cast<std::size_t>(v[4]),
                        v[5]});
    }
    return rows;
}

/// One training run per (d, L). A failing point is reported on `err` and
/// recorded as a NaN row; the sweep carries on.
inline std::vector<SweepRow> run_sweep(const PreparedData& data, const ModelConfig& base, const TrainConfig& tc,
                                       const std::vector<int>& d_list, const std::vector<int>& l_list,
                                       std::ostream& err) {
    std::vector<SweepRow> rows;
    for (int d : d_list) {
        for (int layers : l_list) {
            SweepRow row;
            row.d = d;
            row.layers = layers;
            ModelConfig mc = base;
            mc.hidden_dim = d;
            mc.num_layers = layers;
            mc.num_stations = mc.spatial == SpatialEncoding::relative ? static_cast<int>(data.obs.num_stations()) : 0;
            try {
                mc.validate();
                row.params = parameter_count(mc);
                const auto t0 = std::chrono::steady_clock::now();
                const auto result = fit(init_params(mc, tc.seed), data, tc);
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                row.epoch_seconds = secs / static_cast<double>(result.history.size());
                const auto& best = result.history.at(static_cast<std::size_t>(result.best_epoch - 1));
                row.val_mse = best.val_mse;
                row.val_mae = best.val_mae;
            } catch (const Error& e) {
                err << error_line(e.category(), "sweep point d=" + std::to_string(d) + " L=" + std::to_string(layers) +
                                                    ": " + e.what())
                    << '\n';
            }
            rows.push_back(row);
        }
    }
    return rows;
}

inline void cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const auto paths = detail::require_data(cfg);
    const auto tc = train_config(cfg);
    const auto base = model_config(cfg);
    const auto d_list = int_list(cfg, "sweep_d", {base.hidden_dim});
    const auto l_list = int_list(cfg, "sweep_L", {base.num_layers});
    const auto dir = detail::require_out_dir(cfg);

    auto data = detail::prepare(cfg, detail::load_data(paths));
    detail::make_out_dir(dir);
    const auto rows = run_sweep(data, base, tc, d_list, l_list, err);
    write_sweep_csv(dir / "sweep.csv", rows);
    for (const auto& r : rows) {
        out << "d=" << r.d << " L=" << r.layers << " params=" << r.params << " val_mse=" << csv::format_double(r.val_mse)
            << " val_mae=" << csv::format_double(r.val_mae) << '\n';
    }
}

inline void cmd_param_count(const RunConfig& cfg, std::ostream& out) {
    auto mc = model_config(cfg);
    if (mc.spatial == SpatialEncoding::relative) {
        throw ConfigError("param-count with relative spatial encoding needs a station count; use spatial = abs");
    }
    mc.validate();
    out << "enumerated: " << parameter_count(mc) << '\n'
        << "closed_form: " << closed_form_parameter_count(mc) << '\n';
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"ingest-check", "synth", "train", "evaluate",
                                                   "forecast", "ablate", "sweep", "param-count"};
    return names;
}

/// Runs `command` and maps failures to exit codes with one line on `err`.
inline int run_command(const std::string& command, const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    try {
        if (command == "ingest-check") {
            cmd_ingest_check(cfg, out);
        } else if (command == "synth") {
            cmd_synth(cfg, out);
        } else if (command == "train") {
            cmd_train(cfg, out);
        } else if (command == "evaluate") {
            cmd_evaluate(cfg, out);
        } else if (command == "forecast") {
            cmd_forecast(cfg, out);
        } else if (command == "ablate") {
            cmd_ablate(cfg, out);
        } else if (command == "sweep") {
            cmd_sweep(cfg, out, err);
        } else if (command == "param-count") {
            cmd_param_count(cfg, out);
        } else {
            err << error_line("usage error", "unknown command '" + command + "'") << '\n';
            return static_cast<int>(ExitCode::config);
        }
    } catch (const Error& e) {
        err << error_line(e.category(), e.what()) << '\n';
        return static_cast<int>(exit_code_for(e));
    } catch (const std::exception& e) {
        err << error_line("io error", e.what()) << '\n';
        return static_cast<int>(ExitCode::config);
    }
    return static_cast<int>(ExitCode::ok);
}

}  // namespace lightweather
