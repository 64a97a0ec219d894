#pragma once

// Flat `key = value` run configuration shared by all CLI commands.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lightweather/ablation.hpp"
#include "lightweather/calendar.hpp"
#include "lightweather/checkpoint.hpp"
#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/synthetic.hpp"
#include "lightweather/training.hpp"

namespace lightweather {

inline constexpr std::array<std::string_view, 32> kRunConfigKeys = {
    // paths
    "stations_csv", "observations_csv", "out_dir", "checkpoint",
    // model
    "hidden_dim", "num_layers", "history_len", "horizon_len", "spatial", "temporal",
    // training
    "lr", "batch_size", "max_epochs", "patience", "seed", "normalize", "record_seconds", "checkpoint_dtype",
    // evaluation / forecast / experiments
    "eval_split", "forecast_timestamp", "ablation_seeds", "sweep_d", "sweep_L",
    // synthetic generator
    "synth_stations", "synth_steps", "synth_interval", "synth_alpha", "synth_amp_diurnal", "synth_amp_annual",
    "synth_amp_elev", "synth_noise_std", "synth_start"};

class RunConfig {
public:
    RunConfig() = default;

    static RunConfig parse(std::string_view text, const std::string& origin = "<config>") {
        RunConfig cfg;
        std::istringstream in{std::string(text)};
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const auto trimmed = csv::trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            const auto where = origin + ":" + std::to_string(line_no);
            if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
            const std::string key(csv::trim(trimmed.substr(0, eq)));
            const std::string value(csv::trim(trimmed.substr(eq + 1)));
            if (!is_known_key(key)) throw ConfigError(where + ": unknown key '" + key + "'");
            if (cfg.values_.count(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path.string());
    }

    static bool is_known_key(std::string_view key) {
        return std::find(kRunConfigKeys.begin(), kRunConfigKeys.end(), key) != kRunConfigKeys.end();
    }

    void set(const std::string& key, const std::string& value) {
        if (!is_known_key(key)) throw ConfigError("unknown key '" + key + "'");
        values_[key] = value;
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) > 0; }

    [[nodiscard]] std::optional<std::string> get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::string get_string(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        const auto s = get(key);
        if (!s) return fallback;
        const auto v = csv::parse_double(*s);
        if (!v) throw ConfigError("key '" + key + "': '" + *s + "' is not a number");
        return *v;
    }

    [[nodiscard]] std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
        const auto s = get(key);
        if (!s) return fallback;
        std::int64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size()) {
            throw ConfigError("key '" + key + "': '" + *s + "' is not an integer");
        }
        return v;
    }

    [[nodiscard]] std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        const auto s = get(key);
        if (!s) return fallback;
        std::uint64_t v = 0;
        const auto [ptr, ec] = std::from_chars(s->data(), s->data() + s->size(), v);
        if (ec != std::errc{} || ptr != s->data() + s->size()) {
            throw ConfigError("key '" + key + "': '" + *s + "' is not an unsigned integer");
        }
        return v;
    }

    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        const auto s = get(key);
        if (!s) return fallback;
        if (*s == "1" || *s == "true" || *s == "on" || *s == "yes") return true;
        if (*s == "0" || *s == "false" || *s == "off" || *s == "no") return false;
        throw ConfigError("key '" + key + "': '" + *s + "' is not a boolean");
    }

    [[nodiscard]] std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const {
        const auto s = get(key);
        if (!s) return fallback;
        std::vector<double> out;
        for (const auto& item : csv::split(*s)) {
            const auto v = csv::parse_double(item);
            if (!v) throw ConfigError("key '" + key + "': '" + item + "' is not a number");
            out.push_back(*v);
        }
        if (out.empty()) throw ConfigError("key '" + key + "' is an empty list");
        return out;
    }

    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    std::map<std::string, std::string> values_;
};

namespace detail {

inline int positive_int(const RunConfig& cfg, const std::string& key, std::int64_t fallback) {
    const auto v = cfg.get_int(key, fallback);
    if (v < 1 || v > 1'000'000) throw ConfigError("key '" + key + "' must be a positive integer");
    return static_cast<int>(v);
}

}  // namespace detail

/// Model geometry from the config; `num_stations` feeds relative encoding.
inline ModelConfig model_config(const RunConfig& cfg, int num_stations = 0) {
    ModelConfig m;
    m.hidden_dim = detail::positive_int(cfg, "hidden_dim", 64);
    m.num_layers = detail::positive_int(cfg, "num_layers", 2);
    m.history_len = detail::positive_int(cfg, "history_len", 48);
    m.horizon_len = detail::positive_int(cfg, "horizon_len", 24);
    m.spatial = parse_spatial_encoding(cfg.get_string("spatial", "abs"));
    m.temporal = parse_temporal_encoding(cfg.get_string("temporal", "abs"));
    m.num_stations = m.spatial == SpatialEncoding::relative ? num_stations : 0;
    return m;
}

inline TrainConfig train_config(const RunConfig& cfg) {
    TrainConfig t;
    t.lr = cfg.get_double("lr", 5e-4);
    t.batch_size = static_cast<std::size_t>(detail::positive_int(cfg, "batch_size", 32));
    t.max_epochs = detail::positive_int(cfg, "max_epochs", 100);
    t.patience = detail::positive_int(cfg, "patience", 5);
    t.seed = cfg.get_u64("seed", 0);
    t.normalize = cfg.get_bool("normalize", true);
    t.record_seconds = cfg.get_bool("record_seconds", false);
    t.validate();
    return t;
}

inline ElementType checkpoint_dtype(const RunConfig& cfg) {
    const auto s = cfg.get_string("checkpoint_dtype", "f64");
    if (s == "f64") return ElementType::f64;
    if (s == "f32") return ElementType::f32;
    throw ConfigError("checkpoint_dtype must be f32 or f64");
}

inline std::chrono::seconds parse_interval(const std::string& s) {
    if (s == "hour" || s == "1h") return std::chrono::hours{1};
    if (s == "day" || s == "1d") return std::chrono::hours{24};
    throw ConfigError("synth_interval must be 'hour' or 'day'");
}

/// Generator settings. A single `synth_alpha` value is repeated T_h times.
inline SynthConfig synth_config(const RunConfig& cfg) {
    const auto model = model_config(cfg);
    SynthConfig s;
    s.n_stations = static_cast<std::size_t>(detail::positive_int(cfg, "synth_stations", 50));
    s.n_steps = static_cast<std::size_t>(detail::positive_int(cfg, "synth_steps", 2000));
    s.interval = parse_interval(cfg.get_string("synth_interval", "hour"));
    auto alpha = cfg.get_list("synth_alpha", {0.0});
    if (alpha.size() == 1) alpha.assign(static_cast<std::size_t>(model.history_len), alpha.front());
    s.alpha = std::move(alpha);
    s.horizon_len = static_cast<std::size_t>(model.horizon_len);
    s.amp_diurnal = cfg.get_double("synth_amp_diurnal", 1.0);
    s.amp_annual = cfg.get_double("synth_amp_annual", 1.0);
    s.amp_elev = cfg.get_double("synth_amp_elev", 1.0);
    s.noise_std = cfg.get_double("synth_noise_std", 0.0);
    s.seed = cfg.get_u64("seed", 0);
    if (const auto start = cfg.get("synth_start")) {
        try {
            s.start = parse_timestamp(*start);
        } catch (const ValidationError& e) {
            throw ConfigError(std::string("synth_start: ") + e.what());
        }
    }
    s.validate();
    return s;
}

inline std::vector<std::uint64_t> ablation_seeds(const RunConfig& cfg) {
    std::vector<std::uint64_t> seeds;
    for (double v : cfg.get_list("ablation_seeds", {1, 2, 3})) {
        if (v < 0 || v != std::floor(v)) throw ConfigError("ablation_seeds must be non-negative integers");
        seeds.push_back(static_cast<std::uint64_t>(v));
    }
    if (seeds.size() < 3) throw ConfigError("ablation_seeds needs at least 3 seeds");
    return seeds;
}

inline std::vector<int> int_list(const RunConfig& cfg, const std::string& key, std::vector<int> fallback) {
    if (!cfg.has(key)) return fallback;
    std::vector<int> out;
    for (double v : cfg.get_list(key, {})) {
        if (v < 1 || v != std::floor(v)) throw ConfigError("key '" + key + "' must list positive integers");
        out.push_back(static_cast<int>(v));
    }
    return out;
}

}  // namespace lightweather
