#pragma once

// Station/observation CSV ingestion, chronological splitting, windowing and
// per-variable z-score normalization.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lightweather/calendar.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/numerics.hpp"

namespace lightweather {

struct Station {
    std::string id;
    StationCoord coord;

    friend bool operator==(const Station&, const Station&) = default;
};

/// Dense, uniformly sampled observations: values(t, n, c).
struct ObservationSet {
    std::vector<Timestamp> timestamps;
    std::chrono::seconds interval{3600};
    std::vector<Station> stations;
    std::vector<std::string> variables;
    Tensor3 values;

    [[nodiscard]] std::size_t num_steps() const noexcept { return timestamps.size(); }
    [[nodiscard]] std::size_t num_stations() const noexcept { return stations.size(); }
    [[nodiscard]] std::size_t num_variables() const noexcept { return variables.size(); }

    [[nodiscard]] std::vector<StationCoord> coords() const {
        std::vector<StationCoord> out;
        out.reserve(stations.size());
        for (const auto& s : stations) out.push_back(s.coord);
        return out;
    }

    /// Index of `ts` on the grid, or nullopt if it is not a grid point. The
    /// point one interval past the last observation is also accepted.
    [[nodiscard]] std::optional<std::size_t> index_of(Timestamp ts) const {
        if (timestamps.empty() || ts < timestamps.front()) return std::nullopt;
        const auto offset = ts - timestamps.front();
        if (offset % interval != std::chrono::seconds{0}) return std::nullopt;
        const auto idx = static_cast<std::size_t>(offset / interval);
        if (idx > timestamps.size()) return std::nullopt;
        return idx;
    }

    [[nodiscard]] Timestamp timestamp_at(std::size_t idx) const {
        return timestamps.front() + interval * static_cast<long long>(idx);
    }
};

namespace csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline bool is_missing_token(std::string_view s) {
    s = trim(s);
    return s.empty() || s == "nan" || s == "NaN" || s == "NA" || s == "null";
}

/// Line-oriented reader that strips a UTF-8 BOM and skips blank lines.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
        if (!in_) throw IngestionError("cannot open '" + path_ + "'");
    }

    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (line_no_ == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (!trim(line).empty()) return true;
        }
        return false;
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_no_; }
    [[nodiscard]] const std::string& path() const noexcept { return path_; }

    [[noreturn]] void fail(const std::string& msg) const {
        throw IngestionError(path_ + ":" + std::to_string(line_no_) + ": " + msg);
    }

private:
    std::string path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

inline std::size_t require_column(const std::vector<std::string>& header, std::string_view name, const Reader& r) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) r.fail("missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace csv

/// Reads `station_id,lat,lon,elev`. Order of rows is preserved.
inline std::vector<Station> load_stations_csv(const std::filesystem::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line)) reader.fail("empty file, expected header station_id,lat,lon,elev");
    const auto header = csv::split(line);
    const auto c_id = csv::require_column(header, "station_id", reader);
    const auto c_lat = csv::require_column(header, "lat", reader);
    const auto c_lon = csv::require_column(header, "lon", reader);
    const auto c_elev = csv::require_column(header, "elev", reader);

    std::vector<Station> stations;
    std::unordered_map<std::string, std::size_t> seen;
    while (reader.next(line)) {
        const auto fields = csv::split(line);
        if (fields.size() != header.size()) {
            reader.fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        Station s;
        s.id = fields[c_id];
        if (s.id.empty()) reader.fail("empty station_id");
        auto number = [&](std::size_t col, const char* what) {
            const auto v = csv::parse_double(fields[col]);
            if (!v || !std::isfinite(*v)) reader.fail(std::string("unparsable ") + what + " '" + fields[col] + "'");
            return *v;
        };
        s.coord = {number(c_lat, "lat"), number(c_lon, "lon"), number(c_elev, "elev")};
        try {
            validate(s.coord);
        } catch (const ValidationError& e) {
            reader.fail(std::string("range error: ") + e.what());
        }
        if (!seen.emplace(s.id, stations.size()).second) reader.fail("duplicate station_id '" + s.id + "'");
        stations.push_back(std::move(s));
    }
    if (stations.empty()) throw IngestionError(reader.path() + ": no stations");
    return stations;
}

inline constexpr double kMaxMissingFraction = 0.10;

/// Reads long-format `timestamp,station_id,<var>...` rows into a dense tensor
/// ordered like `stations`. Missing cells are forward-filled per station
/// (leading gaps take the first observed value); more than 10% missing for any
/// station is an error.
inline ObservationSet load_observations_csv(const std::filesystem::path& path, const std::vector<Station>& stations) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line)) reader.fail("empty file, expected header timestamp,station_id,var_0[,...]");
    const auto header = csv::split(line);
    if (header.size() < 3 || header[0] != "timestamp" || header[1] != "station_id") {
        reader.fail("header must start with timestamp,station_id and name at least one variable");
    }

    ObservationSet obs;
    obs.stations = stations;
    obs.variables.assign(header.begin() + 2, header.end());
    const std::size_t n_vars = obs.variables.size();

    std::unordered_map<std::string, std::size_t> station_index;
    for (std::size_t i = 0; i < stations.size(); ++i) station_index.emplace(stations[i].id, i);

    struct Row {
        Timestamp ts;
        std::size_t station;
        std::vector<double> values;
        std::size_t line;
    };
    std::vector<Row> rows;
    while (reader.next(line)) {
        const auto fields = csv::split(line);
        if (fields.size() != header.size()) {
            reader.fail("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        Row row;
        row.line = reader.line();
        try {
            row.ts = parse_timestamp(fields[0]);
        } catch (const ValidationError& e) {
            reader.fail(e.what());
        }
        const auto it = station_index.find(fields[1]);
        if (it == station_index.end()) reader.fail("unknown station id '" + fields[1] + "'");
        row.station = it->second;
        row.values.resize(n_vars);
        for (std::size_t c = 0; c < n_vars; ++c) {
            const auto& f = fields[2 + c];
            if (csv::is_missing_token(f)) {
                row.values[c] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            const auto v = csv::parse_double(f);
            if (!v) reader.fail("unparsable value '" + f + "' for " + obs.variables[c]);
            row.values[c] = std::isfinite(*v) ? *v : std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestionError(reader.path() + ": no observations");

    for (const auto& r : rows) obs.timestamps.push_back(r.ts);
    std::sort(obs.timestamps.begin(), obs.timestamps.end());
    obs.timestamps.erase(std::unique(obs.timestamps.begin(), obs.timestamps.end()), obs.timestamps.end());
    if (obs.timestamps.size() >= 2) {
        obs.interval = std::chrono::duration_cast<std::chrono::seconds>(obs.timestamps[1] - obs.timestamps[0]);
        for (std::size_t i = 2; i < obs.timestamps.size(); ++i) {
            if (obs.timestamps[i] - obs.timestamps[i - 1] != obs.interval) {
                throw IngestionError(reader.path() + ": non-uniform timestamp grid at " +
                                     format_timestamp(obs.timestamps[i - 1]) + " -> " +
                                     format_timestamp(obs.timestamps[i]));
            }
        }
    }

    const std::size_t T = obs.timestamps.size();
    const std::size_t N = stations.size();
    obs.values = Tensor3(T, N, n_vars, std::numeric_limits<double>::quiet_NaN());
    std::vector<bool> filled(T * N, false);
    for (const auto& r : rows) {
        const auto t = static_cast<std::size_t>(
            std::lower_bound(obs.timestamps.begin(), obs.timestamps.end(), r.ts) - obs.timestamps.begin());
        if (filled[t * N + r.station]) {
            throw IngestionError(reader.path() + ":" + std::to_string(r.line) + ": duplicate row for station '" +
                                 stations[r.station].id + "' at " + format_timestamp(r.ts));
        }
        filled[t * N + r.station] = true;
        for (std::size_t c = 0; c < n_vars; ++c) obs.values(t, r.station, c) = r.values[c];
    }

    for (std::size_t n = 0; n < N; ++n) {
        std::size_t missing = 0;
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t c = 0; c < n_vars; ++c) missing += std::isnan(obs.values(t, n, c)) ? 1 : 0;
        }
        const double fraction = static_cast<double>(missing) / static_cast<double>(T * n_vars);
        if (fraction > kMaxMissingFraction) {
            throw IngestionError(reader.path() + ": station '" + stations[n].id + "' is missing " +
                                 std::to_string(missing) + " of " + std::to_string(T * n_vars) +
                                 " values (more than 10%)");
        }
        for (std::size_t c = 0; c < n_vars; ++c) {
            double last = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t t = 0; t < T; ++t) {
                if (std::isnan(obs.values(t, n, c))) {
                    obs.values(t, n, c) = last;
                } else {
                    last = obs.values(t, n, c);
                }
            }
            // Leading gap: no earlier value exists, take the first observation.
            std::size_t first = 0;
            while (first < T && std::isnan(obs.values(first, n, c))) ++first;
            for (std::size_t t = 0; t < first && first < T; ++t) obs.values(t, n, c) = obs.values(first, n, c);
        }
    }
    return obs;
}

inline void write_stations_csv(const std::filesystem::path& path, const std::vector<Station>& stations) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write '" + path.string() + "'");
    out << "station_id,lat,lon,elev\n";
    for (const auto& s : stations) {
        out << s.id << ',' << csv::format_double(s.coord.latitude) << ',' << csv::format_double(s.coord.longitude)
            << ',' << csv::format_double(s.coord.elevation) << '\n';
    }
}

inline void write_observations_csv(const std::filesystem::path& path, const ObservationSet& obs) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write '" + path.string() + "'");
    out << "timestamp,station_id";
    for (const auto& v : obs.variables) out << ',' << v;
    out << '\n';
    for (std::size_t t = 0; t < obs.num_steps(); ++t) {
        const auto ts = format_timestamp(obs.timestamps[t]);
        for (std::size_t n = 0; n < obs.num_stations(); ++n) {
            out << ts << ',' << obs.stations[n].id;
            for (std::size_t c = 0; c < obs.num_variables(); ++c) out << ',' << csv::format_double(obs.values(t, n, c));
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Splits and windows.

struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct SplitRanges {
    IndexRange train;
    IndexRange val;
    IndexRange test;
};

/// 7:1:2 time-ordered partition of [0, total).
inline SplitRanges chronological_split(std::size_t total, std::size_t history_len, std::size_t horizon_len) {
    const std::size_t n_train = total * 7 / 10;
    const std::size_t n_val = total / 10;
    SplitRanges s{{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, total}};
    const std::size_t need = history_len + horizon_len;
    auto check = [&](const IndexRange& r, const char* name) {
        if (r.size() < need) {
            throw ConfigError(std::string(name) + " split has " + std::to_string(r.size()) +
                              " steps, needs at least T_h + T_f = " + std::to_string(need));
        }
    };
    check(s.train, "train");
    check(s.val, "validation");
    check(s.test, "test");
    return s;
}

struct WindowSample {
    Tensor3 history;           // T_h x N x C
    Tensor3 future;            // T_f x N x C
    TimeFeature time_feature;  // of the first forecast step
    Timestamp first_forecast;
};

/// Stride-1 windows lying entirely inside one split. Read-only view.
class WindowView {
public:
    WindowView(const ObservationSet& obs, const Tensor3& values, IndexRange range, std::size_t history_len,
               std::size_t horizon_len)
        : obs_(&obs), values_(&values), range_(range), history_(history_len), horizon_(horizon_len) {
        if (range.end > values.steps() || range.begin > range.end) throw ShapeError("window range out of bounds");
    }

    /// len - T_h - T_f + 1, or 0 when the split is too short.
    [[nodiscard]] std::size_t size() const noexcept {
        const auto need = history_ + horizon_;
        return range_.size() >= need ? range_.size() - need + 1 : 0;
    }
    [[nodiscard]] std::size_t history_len() const noexcept { return history_; }
    [[nodiscard]] std::size_t horizon_len() const noexcept { return horizon_; }

    /// Absolute index of the first history step of window `i`.
    [[nodiscard]] std::size_t history_start(std::size_t i) const noexcept { return range_.begin + i; }
    /// Absolute index of the first forecast step of window `i`.
    [[nodiscard]] std::size_t forecast_start(std::size_t i) const noexcept { return range_.begin + i + history_; }

    [[nodiscard]] TimeFeature time_feature(std::size_t i) const {
        return lightweather::time_feature(obs_->timestamps[forecast_start(i)]);
    }

    [[nodiscard]] const Tensor3& values() const noexcept { return *values_; }
    [[nodiscard]] const ObservationSet& observations() const noexcept { return *obs_; }

    [[nodiscard]] WindowSample operator[](std::size_t i) const {
        if (i >= size()) throw ShapeError("window index out of range");
        const auto& v = *values_;
        WindowSample w{Tensor3(history_, v.stations(), v.variables()), Tensor3(horizon_, v.stations(), v.variables()),
                       time_feature(i), obs_->timestamps[forecast_start(i)]};
        for (std::size_t n = 0; n < v.stations(); ++n) {
            for (std::size_t c = 0; c < v.variables(); ++c) {
                for (std::size_t k = 0; k < history_; ++k) w.history(k, n, c) = v(history_start(i) + k, n, c);
                for (std::size_t k = 0; k < horizon_; ++k) w.future(k, n, c) = v(forecast_start(i) + k, n, c);
            }
        }
        return w;
    }

private:
    const ObservationSet* obs_;
    const Tensor3* values_;
    IndexRange range_;
    std::size_t history_;
    std::size_t horizon_;
};

inline WindowView make_windows(const ObservationSet& obs, const Tensor3& values, IndexRange range,
                               std::size_t history_len, std::size_t horizon_len) {
    return WindowView(obs, values, range, history_len, horizon_len);
}

inline WindowView make_windows(const ObservationSet& obs, IndexRange range, std::size_t history_len,
                               std::size_t horizon_len) {
    return WindowView(obs, obs.values, range, history_len, horizon_len);
}

// ---------------------------------------------------------------------------

/// Per-variable z-score fitted on the training range only. A disabled
/// normalizer is the identity.
class Normalizer {
public:
    Normalizer() = default;

    static Normalizer identity(std::size_t variables) {
        Normalizer n;
        n.mean_.assign(variables, 0.0);
        n.std_.assign(variables, 1.0);
        return n;
    }

    static Normalizer fit(const Tensor3& values, IndexRange train, const std::vector<std::string>& names = {}) {
        if (train.size() == 0 || train.end > values.steps()) throw ConfigError("normalizer needs a non-empty train range");
        Normalizer n;
        const std::size_t C = values.variables();
        n.mean_.assign(C, 0.0);
        n.std_.assign(C, 0.0);
        const double count = static_cast<double>(train.size() * values.stations());
        for (std::size_t c = 0; c < C; ++c) {
            double sum = 0.0;
            for (std::size_t t = train.begin; t < train.end; ++t) {
                for (std::size_t s = 0; s < values.stations(); ++s) sum += values(t, s, c);
            }
            const double mean = sum / count;
            double sq = 0.0;
            for (std::size_t t = train.begin; t < train.end; ++t) {
                for (std::size_t s = 0; s < values.stations(); ++s) {
                    const double d = values(t, s, c) - mean;
                    sq += d * d;
                }
            }
            const double std = std::sqrt(sq / count);
            if (!(std > 0.0)) {
                const std::string name = c < names.size() ? names[c] : "var_" + std::to_string(c);
                throw DegenerateVariableError("variable '" + name + "' has zero variance on the training split");
            }
            n.mean_[c] = mean;
            n.std_[c] = std;
        }
        return n;
    }

    [[nodiscard]] double apply(std::size_t c, double x) const { return (x - mean_[c]) / std_[c]; }
    [[nodiscard]] double invert(std::size_t c, double z) const { return z * std_[c] + mean_[c]; }

    [[nodiscard]] Tensor3 apply(const Tensor3& values) const { return transform(values, false); }
    [[nodiscard]] Tensor3 invert(const Tensor3& values) const { return transform(values, true); }

    [[nodiscard]] const std::vector<double>& mean() const noexcept { return mean_; }
    [[nodiscard]] const std::vector<double>& stddev() const noexcept { return std_; }

private:
    [[nodiscard]] Tensor3 transform(const Tensor3& values, bool inverse) const {
        if (values.variables() != mean_.size()) throw ShapeError("normalizer variable count mismatch");
        Tensor3 out = values;
        for (std::size_t t = 0; t < values.steps(); ++t) {
            for (std::size_t s = 0; s < values.stations(); ++s) {
                for (std::size_t c = 0; c < values.variables(); ++c) {
                    out(t, s, c) = inverse ? invert(c, values(t, s, c)) : apply(c, values(t, s, c));
                }
            }
        }
        return out;
    }

    std::vector<double> mean_;
    std::vector<double> std_;
};

// ---------------------------------------------------------------------------
// Forecast output: station_id,step,var,value

struct ForecastRow {
    std::string station_id;
    int step = 0;  // 1-based horizon step
    std::string variable;
    double value = 0.0;

    friend bool operator==(const ForecastRow&, const ForecastRow&) = default;
};

inline void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IngestionError("cannot write '" + path.string() + "'");
    out << "station_id,step,var,value\n";
    for (const auto& r : rows) {
        out << r.station_id << ',' << r.step << ',' << r.variable << ',' << csv::format_double(r.value) << '\n';
    }
}

inline std::vector<ForecastRow> load_forecast_csv(const std::filesystem::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line) || csv::split(line) != std::vector<std::string>{"station_id", "step", "var", "value"}) {
        reader.fail("expected header station_id,step,var,value");
    }
    std::vector<ForecastRow> rows;
    while (reader.next(line)) {
        const auto f = csv::split(line);
        if (f.size() != 4) reader.fail("expected 4 fields");
        ForecastRow r;
        r.station_id = f[0];
        const auto step = csv::parse_double(f[1]);
        const auto value = csv::parse_double(f[3]);
        if (!step || !value) reader.fail("unparsable forecast row");
        r.step = static_cast<int>(*step);
        r.variable = f[2];
        r.value = *value;
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace lightweather
