#pragma once

// The forecasting network. Every (station, variable) history is embedded by a
// shared fully connected layer, summed with a spatial encoding of the station
// coordinates and three calendar embeddings (hour, day of month, month),
// passed through a residual MLP encoder and regressed onto the horizon.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lightweather/calendar.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/numerics.hpp"

namespace lightweather {

enum class SpatialEncoding { absolute, relative, none };
enum class TemporalEncoding { absolute, none };

inline std::string to_string(SpatialEncoding s) {
    switch (s) {
        case SpatialEncoding::absolute: return "abs";
        case SpatialEncoding::relative: return "rel";
        case SpatialEncoding::none: return "none";
    }
    return "?";
}

inline std::string to_string(TemporalEncoding t) {
    return t == TemporalEncoding::absolute ? "abs" : "none";
}

inline SpatialEncoding parse_spatial_encoding(std::string_view s) {
    if (s == "abs" || s == "absolute") return SpatialEncoding::absolute;
    if (s == "rel" || s == "relative") return SpatialEncoding::relative;
    if (s == "none") return SpatialEncoding::none;
    throw ConfigError("unknown spatial encoding '" + std::string(s) + "' (expected abs|rel|none)");
}

inline TemporalEncoding parse_temporal_encoding(std::string_view s) {
    if (s == "abs" || s == "absolute") return TemporalEncoding::absolute;
    if (s == "none") return TemporalEncoding::none;
    throw ConfigError("unknown temporal encoding '" + std::string(s) + "' (expected abs|none)");
}

inline constexpr int kHoursPerDay = 24;
inline constexpr int kDaysPerMonth = 31;
inline constexpr int kMonthsPerYear = 12;

struct StationCoord {
    double latitude = 0.0;   // degrees
    double longitude = 0.0;  // degrees
    double elevation = 0.0;  // meters

    friend bool operator==(const StationCoord&, const StationCoord&) = default;
};

inline void validate(const StationCoord& c) {
    if (!std::isfinite(c.latitude) || c.latitude < -90.0 || c.latitude > 90.0) {
        throw ValidationError("latitude " + std::to_string(c.latitude) + " outside [-90, 90]");
    }
    if (!std::isfinite(c.longitude) || c.longitude < -180.0 || c.longitude > 180.0) {
        throw ValidationError("longitude " + std::to_string(c.longitude) + " outside [-180, 180]");
    }
    if (!std::isfinite(c.elevation)) throw ValidationError("elevation is not finite");
}

/// Scales coordinates to O(1): latitude/90, longitude/180, elevation/10 km.
inline Vector normalize_coord(const StationCoord& c) {
    validate(c);
    Vector v(3);
    v << c.latitude / 90.0, c.longitude / 180.0, c.elevation / 10000.0;
    return v;
}

/// N x 3 matrix of normalized coordinates.
inline Matrix coord_matrix(std::span<const StationCoord> coords) {
    Matrix m(static_cast<Eigen::Index>(coords.size()), 3);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        m.row(static_cast<Eigen::Index>(i)) = normalize_coord(coords[i]).transpose();
    }
    return m;
}

struct ModelConfig {
    int hidden_dim = 64;
    int num_layers = 2;
    int history_len = 48;
    int horizon_len = 24;
    int num_variables = 1;
    SpatialEncoding spatial = SpatialEncoding::absolute;
    TemporalEncoding temporal = TemporalEncoding::absolute;
    int num_stations = 0;  // only required by relative spatial encoding

    void validate() const {
        if (hidden_dim < 1 || num_layers < 1 || history_len < 1 || horizon_len < 1 || num_variables < 1) {
            throw ConfigError("model config requires d, L, T_h, T_f, C >= 1");
        }
        if (spatial == SpatialEncoding::relative && num_stations < 1) {
            throw ConfigError("relative spatial encoding requires a known station count");
        }
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderBlock {
    LinearLayer fc1;
    LinearLayer fc2;
};

/// Every learnable tensor. Tensors belonging to a disabled encoding stay empty.
struct ModelParams {
    ModelConfig config;
    LinearLayer fc_embed;
    LinearLayer fc_spatial;
    Matrix station_table;
    Matrix table_hour;
    Matrix table_day;
    Matrix table_month;
    std::vector<EncoderBlock> encoder;
    LinearLayer fc_regress;

    /// All-zero parameters (and the shape template for gradients).
    static ModelParams zeros(const ModelConfig& cfg) {
        cfg.validate();
        const Eigen::Index d = cfg.hidden_dim;
        ModelParams p;
        p.config = cfg;
        p.fc_embed = LinearLayer(cfg.history_len, d);
        if (cfg.spatial == SpatialEncoding::absolute) p.fc_spatial = LinearLayer(3, d);
        if (cfg.spatial == SpatialEncoding::relative) p.station_table = Matrix::Zero(cfg.num_stations, d);
        if (cfg.temporal == TemporalEncoding::absolute) {
            p.table_hour = Matrix::Zero(kHoursPerDay, d);
            p.table_day = Matrix::Zero(kDaysPerMonth, d);
            p.table_month = Matrix::Zero(kMonthsPerYear, d);
        }
        p.encoder.resize(static_cast<std::size_t>(cfg.num_layers));
        for (auto& block : p.encoder) {
            block.fc1 = LinearLayer(d, d);
            block.fc2 = LinearLayer(d, d);
        }
        p.fc_regress = LinearLayer(d, cfg.horizon_len);
        return p;
    }
};

struct TensorRef {
    std::string name;
    std::vector<std::int64_t> shape;
    std::span<double> values;
};

struct TensorView {
    std::string name;
    std::vector<std::int64_t> shape;
    std::span<const double> values;
};

namespace detail {

template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& emit) {
    auto matrix = [&](const std::string& name, auto& m) {
        if (m.size() == 0) return;
        emit(name, std::vector<std::int64_t>{m.rows(), m.cols()}, m.data(), m.size());
    };
    auto vector = [&](const std::string& name, auto& v) {
        if (v.size() == 0) return;
        emit(name, std::vector<std::int64_t>{v.size()}, v.data(), v.size());
    };
    auto layer = [&](const std::string& name, auto& l) {
        matrix(name + ".weight", l.weight);
        vector(name + ".bias", l.bias);
    };
    layer("fc_embed", p.fc_embed);
    layer("fc_spatial", p.fc_spatial);
    matrix("station_table", p.station_table);
    matrix("table_hour", p.table_hour);
    matrix("table_day", p.table_day);
    matrix("table_month", p.table_month);
    for (std::size_t l = 0; l < p.encoder.size(); ++l) {
        layer("encoder." + std::to_string(l) + ".fc1", p.encoder[l].fc1);
        layer("encoder." + std::to_string(l) + ".fc2", p.encoder[l].fc2);
    }
    layer("fc_regress", p.fc_regress);
}

}  // namespace detail

/// Present tensors in canonical (checkpoint) order.
inline std::vector<TensorRef> tensors(ModelParams& p) {
    std::vector<TensorRef> out;
    detail::visit_tensors<ModelParams>(
        p, [&](std::string name, std::vector<std::int64_t> shape, double* data, Eigen::Index n) {
            out.push_back({std::move(name), std::move(shape), {data, static_cast<std::size_t>(n)}});
        });
    return out;
}

inline std::vector<TensorView> tensors(const ModelParams& p) {
    std::vector<TensorView> out;
    detail::visit_tensors<const ModelParams>(
        p, [&](std::string name, std::vector<std::int64_t> shape, const double* data, Eigen::Index n) {
            out.push_back({std::move(name), std::move(shape), {data, static_cast<std::size_t>(n)}});
        });
    return out;
}

inline std::size_t count_parameters(const ModelParams& p) {
    std::size_t n = 0;
    for (const auto& t : tensors(p)) n += t.values.size();
    return n;
}

/// Enumerated parameter count of the architecture described by `cfg`.
inline std::int64_t parameter_count(const ModelConfig& cfg) {
    cfg.validate();
    const std::int64_t d = cfg.hidden_dim, L = cfg.num_layers, th = cfg.history_len, tf = cfg.horizon_len;
    std::int64_t total = d * (th + 1) + 2 * L * d * (d + 1) + tf * (d + 1);
    if (cfg.spatial == SpatialEncoding::absolute) total += 4 * d;
    if (cfg.spatial == SpatialEncoding::relative) total += std::int64_t{cfg.num_stations} * d;
    if (cfg.temporal == TemporalEncoding::absolute) total += (kHoursPerDay + kDaysPerMonth + kMonthsPerYear) * d;
    return total;
}

/// The published closed form (2Ld + T_h + T_f + 70)(d + 1). It books one bias
/// per input feature of the embedding and spatial layers and one per table row,
/// so it differs from the enumerated count by |T_h + 70 - 2d|. Reported side
/// by side, never reconciled.
inline std::int64_t closed_form_parameter_count(const ModelConfig& cfg) {
    const std::int64_t d = cfg.hidden_dim, L = cfg.num_layers;
    return (2 * L * d + cfg.history_len + cfg.horizon_len + 70) * (d + 1);
}

/// Uniform init: linear layers in +-1/sqrt(fan_in), tables in +-1/sqrt(d).
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    ModelParams p = ModelParams::zeros(cfg);
    std::mt19937_64 rng(seed);
    auto fill = [&](double* data, Eigen::Index n, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < n; ++i) data[i] = dist(rng);
    };
    auto layer = [&](LinearLayer& l) {
        if (l.empty()) return;
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_features()));
        fill(l.weight.data(), l.weight.size(), bound);
        fill(l.bias.data(), l.bias.size(), bound);
    };
    const double table_bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    layer(p.fc_embed);
    layer(p.fc_spatial);
    fill(p.station_table.data(), p.station_table.size(), table_bound);
    fill(p.table_hour.data(), p.table_hour.size(), table_bound);
    fill(p.table_day.data(), p.table_day.size(), table_bound);
    fill(p.table_month.data(), p.table_month.size(), table_bound);
    for (auto& block : p.encoder) {
        layer(block.fc1);
        layer(block.fc2);
    }
    layer(p.fc_regress);
    return p;
}

// ---------------------------------------------------------------------------
// Single-series building blocks.

inline Vector embed_data(const Vector& history, const ModelParams& p) {
    if (history.size() != p.config.history_len) {
        throw ShapeError("embed_data: history length " + std::to_string(history.size()) + ", expected " +
                         std::to_string(p.config.history_len));
    }
    return linear_forward(history, p.fc_embed);
}

inline Vector encode_spatial(const StationCoord& coord, const ModelParams& p) {
    if (p.config.spatial != SpatialEncoding::absolute) {
        throw ConfigError("encode_spatial requires absolute spatial encoding");
    }
    return linear_forward(normalize_coord(coord), p.fc_spatial);
}

/// Learned row of the per-station table (relative spatial encoding).
inline Vector encode_station_index(int station, const ModelParams& p) {
    if (p.config.spatial != SpatialEncoding::relative) {
        throw ConfigError("encode_station_index requires relative spatial encoding");
    }
    if (station < 0 || station >= p.station_table.rows()) {
        throw ValidationError("station index " + std::to_string(station) + " out of range");
    }
    return p.station_table.row(station).transpose();
}

struct TemporalRows {
    Vector hour;
    Vector day;
    Vector month;
};

inline TemporalRows lookup_temporal(const TimeFeature& tf, const ModelParams& p) {
    validate(tf);
    if (p.config.temporal != TemporalEncoding::absolute) {
        throw ConfigError("lookup_temporal requires absolute temporal encoding");
    }
    return {p.table_hour.row(tf.hour).transpose(), p.table_day.row(tf.day_index).transpose(),
            p.table_month.row(tf.month_index).transpose()};
}

inline Vector fuse(const Vector& e, const Vector& s, const Vector& t, const Vector& d, const Vector& m) {
    const auto n = e.size();
    if (s.size() != n || t.size() != n || d.size() != n || m.size() != n) {
        throw ShapeError("fuse: all five encodings must have the same length");
    }
    return e + s + t + d + m;
}

inline Vector encoder_forward(const Vector& h, const ModelParams& p) {
    if (h.size() != p.config.hidden_dim) {
        throw ShapeError("encoder_forward: input length " + std::to_string(h.size()) + ", expected " +
                         std::to_string(p.config.hidden_dim));
    }
    Vector z = h;
    for (const auto& block : p.encoder) {
        z = linear_forward(relu(linear_forward(z, block.fc1)), block.fc2) + z;
    }
    return z;
}

// ---------------------------------------------------------------------------
// Batched forward/backward. Rows are ordered (sample, station, variable):
// row = (b * N + n) * C + c.

struct Batch {
    Matrix history;                  // rows x T_h
    std::vector<TimeFeature> times;  // one per sample
    Matrix coords;                   // N x 3, normalized
    std::size_t num_stations = 0;
    std::size_t num_variables = 0;

    [[nodiscard]] std::size_t num_samples() const noexcept { return times.size(); }
    [[nodiscard]] std::size_t station_of_row(Eigen::Index row) const noexcept {
        return (static_cast<std::size_t>(row) / num_variables) % num_stations;
    }
};

struct ForwardCache {
    const Batch* batch = nullptr;
    std::vector<Matrix> z;    // L + 1 encoder states, z[0] = H
    std::vector<Matrix> pre;  // fc1 outputs
    std::vector<Matrix> act;  // relu(fc1 outputs)
};

inline void check_batch(const Batch& batch, const ModelParams& p) {
    const auto& cfg = p.config;
    const auto expected_rows = batch.num_samples() * batch.num_stations * batch.num_variables;
    if (batch.num_variables != static_cast<std::size_t>(cfg.num_variables)) {
        throw ShapeError("batch has " + std::to_string(batch.num_variables) + " variables, model expects " +
                         std::to_string(cfg.num_variables));
    }
    if (static_cast<std::size_t>(batch.history.rows()) != expected_rows ||
        batch.history.cols() != cfg.history_len) {
        throw ShapeError("batch history is " + shape_string(batch.history.rows(), batch.history.cols()) +
                         ", expected " + std::to_string(expected_rows) + "x" + std::to_string(cfg.history_len));
    }
    if (cfg.spatial == SpatialEncoding::absolute &&
        (static_cast<std::size_t>(batch.coords.rows()) != batch.num_stations || batch.coords.cols() != 3)) {
        throw ShapeError("batch coordinates are " + shape_string(batch.coords.rows(), batch.coords.cols()) +
                         ", expected " + std::to_string(batch.num_stations) + "x3");
    }
    if (cfg.spatial == SpatialEncoding::relative && batch.num_stations != static_cast<std::size_t>(cfg.num_stations)) {
        throw ShapeError("relative spatial encoding was built for " + std::to_string(cfg.num_stations) +
                         " stations, batch has " + std::to_string(batch.num_stations));
    }
    for (const auto& tf : batch.times) validate(tf);
}

/// Predictions (rows x T_f). Intermediates go to `cache` when provided.
inline Matrix forward_rows(const ModelParams& p, const Batch& batch, ForwardCache* cache = nullptr) {
    check_batch(batch, p);
    const auto& cfg = p.config;
    const Eigen::Index per_sample = static_cast<Eigen::Index>(batch.num_stations * batch.num_variables);

    Matrix h = linear_forward_rows(batch.history, p.fc_embed);

    if (cfg.spatial != SpatialEncoding::none) {
        const Matrix s = cfg.spatial == SpatialEncoding::absolute ? linear_forward_rows(batch.coords, p.fc_spatial)
                                                                  : p.station_table;
        for (Eigen::Index r = 0; r < h.rows(); ++r) {
            h.row(r) += s.row(static_cast<Eigen::Index>(batch.station_of_row(r)));
        }
    }
    if (cfg.temporal == TemporalEncoding::absolute) {
        for (std::size_t b = 0; b < batch.num_samples(); ++b) {
            const auto& tf = batch.times[b];
            const Eigen::RowVectorXd t =
                p.table_hour.row(tf.hour) + p.table_day.row(tf.day_index) + p.table_month.row(tf.month_index);
            h.middleRows(static_cast<Eigen::Index>(b) * per_sample, per_sample).rowwise() += t;
        }
    }

    if (cache) {
        cache->batch = &batch;
        cache->z.clear();
        cache->pre.clear();
        cache->act.clear();
        cache->z.push_back(std::move(h));
        for (const auto& block : p.encoder) {
            const Matrix& z = cache->z.back();
            cache->pre.push_back(linear_forward_rows(z, block.fc1));
            cache->act.push_back(relu(cache->pre.back()));
            Matrix next = linear_forward_rows(cache->act.back(), block.fc2);
            next += z;
            cache->z.push_back(std::move(next));
        }
        return linear_forward_rows(cache->z.back(), p.fc_regress);
    }

    for (const auto& block : p.encoder) {
        Matrix next = linear_forward_rows(relu(linear_forward_rows(h, block.fc1)), block.fc2);
        h += next;
    }
    return linear_forward_rows(h, p.fc_regress);
}

/// Accumulates dL/dparams into `grads` given dL/dpredictions.
inline void backward_rows(const ModelParams& p, const ForwardCache& cache, const Matrix& grad_pred,
                          ModelParams& grads) {
    const Batch& batch = *cache.batch;
    const auto& cfg = p.config;
    const std::size_t layers = p.encoder.size();
    if (grad_pred.rows() != cache.z.back().rows() || grad_pred.cols() != cfg.horizon_len) {
        throw ShapeError("backward: gradient is " + shape_string(grad_pred.rows(), grad_pred.cols()));
    }

    Matrix dz = linear_backward_rows(cache.z[layers], p.fc_regress, grad_pred, grads.fc_regress);
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix d_act = linear_backward_rows(cache.act[l], p.encoder[l].fc2, dz, grads.encoder[l].fc2);
        const Matrix d_pre = relu_backward(cache.pre[l], d_act);
        dz += linear_backward_rows(cache.z[l], p.encoder[l].fc1, d_pre, grads.encoder[l].fc1);
    }
    // dz is now dL/dH; H = E + S + T + D + M.
    linear_backward_rows(batch.history, p.fc_embed, dz, grads.fc_embed, false);

    if (cfg.spatial != SpatialEncoding::none) {
        Matrix ds = Matrix::Zero(static_cast<Eigen::Index>(batch.num_stations), cfg.hidden_dim);
        for (Eigen::Index r = 0; r < dz.rows(); ++r) {
            ds.row(static_cast<Eigen::Index>(batch.station_of_row(r))) += dz.row(r);
        }
        if (cfg.spatial == SpatialEncoding::absolute) {
            linear_backward_rows(batch.coords, p.fc_spatial, ds, grads.fc_spatial, false);
        } else {
            grads.station_table += ds;
        }
    }
    if (cfg.temporal == TemporalEncoding::absolute) {
        const Eigen::Index per_sample = static_cast<Eigen::Index>(batch.num_stations * batch.num_variables);
        for (std::size_t b = 0; b < batch.num_samples(); ++b) {
            const auto& tf = batch.times[b];
            const Eigen::RowVectorXd g =
                dz.middleRows(static_cast<Eigen::Index>(b) * per_sample, per_sample).colwise().sum();
            grads.table_hour.row(tf.hour) += g;
            grads.table_day.row(tf.day_index) += g;
            grads.table_month.row(tf.month_index) += g;
        }
    }
}

/// Packs one T_h x N x C history into a single-sample batch.
inline Batch make_single_batch(const Tensor3& history, std::span<const StationCoord> coords, const TimeFeature& tf) {
    if (coords.size() != history.stations()) {
        throw ShapeError("history has " + std::to_string(history.stations()) + " stations but " +
                         std::to_string(coords.size()) + " coordinates were given");
    }
    if (!all_finite(history.values())) throw ValidationError("history contains non-finite values");
    Batch batch;
    batch.num_stations = history.stations();
    batch.num_variables = history.variables();
    batch.times = {tf};
    batch.coords = coord_matrix(coords);
    batch.history.resize(static_cast<Eigen::Index>(history.stations() * history.variables()),
                         static_cast<Eigen::Index>(history.steps()));
    for (std::size_t n = 0; n < history.stations(); ++n) {
        for (std::size_t c = 0; c < history.variables(); ++c) {
            const auto row = static_cast<Eigen::Index>(n * history.variables() + c);
            for (std::size_t t = 0; t < history.steps(); ++t) {
                batch.history(row, static_cast<Eigen::Index>(t)) = history(t, n, c);
            }
        }
    }
    return batch;
}

/// Unpacks rows x T_f predictions of sample `sample` into a T_f x N x C tensor.
inline Tensor3 rows_to_tensor(const Matrix& rows, std::size_t sample, std::size_t stations, std::size_t variables) {
    Tensor3 out(static_cast<std::size_t>(rows.cols()), stations, variables);
    const std::size_t base = sample * stations * variables;
    for (std::size_t n = 0; n < stations; ++n) {
        for (std::size_t c = 0; c < variables; ++c) {
            const auto row = static_cast<Eigen::Index>(base + n * variables + c);
            for (std::size_t k = 0; k < out.steps(); ++k) out(k, n, c) = rows(row, static_cast<Eigen::Index>(k));
        }
    }
    return out;
}

/// Full forecast for one window: T_h x N x C history to T_f x N x C.
inline Tensor3 forward(const Tensor3& history, std::span<const StationCoord> coords, const TimeFeature& tf,
                       const ModelParams& p) {
    if (history.steps() != static_cast<std::size_t>(p.config.history_len)) {
        throw ShapeError("history has " + std::to_string(history.steps()) + " steps, model expects " +
                         std::to_string(p.config.history_len));
    }
    const Batch batch = make_single_batch(history, coords, tf);
    return rows_to_tensor(forward_rows(p, batch), 0, history.stations(), history.variables());
}

}  // namespace lightweather
