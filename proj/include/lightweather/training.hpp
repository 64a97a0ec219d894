#pragma once

// Mini-batch training under the MAE objective with Adam, validation-based
// early stopping and pooled MSE/MAE evaluation in original data units.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lightweather/data.hpp"
#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"
#include "lightweather/numerics.hpp"

namespace lightweather {

struct TrainConfig {
    double lr = 5e-4;
    std::size_t batch_size = 32;
    int max_epochs = 100;
    int patience = 5;
    std::uint64_t seed = 0;
    bool normalize = true;
    bool record_seconds = false;  // wall-clock column makes history non-reproducible

    void validate() const {
        if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite value >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (patience < 1 || patience > max_epochs) throw ConfigError("patience must lie in [1, max_epochs]");
    }
};

/// Pooled squared/absolute error.
struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_points = 0;
};

/// Streaming accumulator; feeding the same residuals in any chunking gives the
/// same result up to summation rounding.
class MetricsAccumulator {
public:
    void add(double residual) {
        sq_ += residual * residual;
        abs_ += std::abs(residual);
        ++n_;
    }
    void add(const Tensor3& pred, const Tensor3& truth) {
        if (!pred.same_shape(truth)) throw ShapeError("metrics: prediction " + pred.shape() + " vs truth " + truth.shape());
        for (std::size_t i = 0; i < pred.size(); ++i) add(pred.values()[i] - truth.values()[i]);
    }
    void merge(const MetricsAccumulator& other) {
        sq_ += other.sq_;
        abs_ += other.abs_;
        n_ += other.n_;
    }
    [[nodiscard]] Metrics result() const {
        if (n_ == 0) throw EvaluationError("no points to evaluate");
        return {sq_ / static_cast<double>(n_), abs_ / static_cast<double>(n_), n_};
    }
    [[nodiscard]] std::size_t count() const noexcept { return n_; }

private:
    double sq_ = 0.0;
    double abs_ = 0.0;
    std::size_t n_ = 0;
};

/// Mean absolute error over all T_f x N x C entries.
inline double mae_loss(const Tensor3& pred, const Tensor3& truth) {
    if (!pred.same_shape(truth)) throw ShapeError("mae_loss: prediction " + pred.shape() + " vs truth " + truth.shape());
    if (pred.size() == 0) throw ShapeError("mae_loss: empty tensors");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred.values()[i] - truth.values()[i]);
    return sum / static_cast<double>(pred.size());
}

/// Batched MAE. When `grad` is given it receives dL/dpred, using sign(0) = 0.
inline double mae_loss_rows(const Matrix& pred, const Matrix& truth, Matrix* grad = nullptr) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || pred.size() == 0) {
        throw ShapeError("mae_loss: prediction " + shape_string(pred.rows(), pred.cols()) + " vs truth " +
                         shape_string(truth.rows(), truth.cols()));
    }
    const double scale = 1.0 / static_cast<double>(pred.size());
    const auto diff = (pred - truth).array();
    if (grad) *grad = (diff.sign() * scale).matrix();
    return diff.abs().sum() * scale;
}

/// Observations plus everything derived from them for one model geometry:
/// splits, train-fitted normalizer and the normalized tensor.
struct PreparedData {
    ObservationSet obs;
    SplitRanges splits;
    Normalizer normalizer;
    Tensor3 scaled;
    Matrix coords;
    std::size_t history_len = 0;
    std::size_t horizon_len = 0;

    [[nodiscard]] WindowView windows(IndexRange range) const {
        return make_windows(obs, scaled, range, history_len, horizon_len);
    }
};

inline PreparedData prepare_data(ObservationSet obs, std::size_t history_len, std::size_t horizon_len,
                                 bool normalize) {
    PreparedData data;
    data.splits = chronological_split(obs.num_steps(), history_len, horizon_len);
    data.normalizer = normalize ? Normalizer::fit(obs.values, data.splits.train, obs.variables)
                                : Normalizer::identity(obs.num_variables());
    data.scaled = data.normalizer.apply(obs.values);
    const auto coords = obs.coords();
    data.coords = coord_matrix(coords);
    data.history_len = history_len;
    data.horizon_len = horizon_len;
    data.obs = std::move(obs);
    return data;
}

/// Packs windows `indices` of `view` into a batch; `targets` (optional)
/// receives the normalized future values in the same row order.
inline Batch assemble_batch(const PreparedData& data, const WindowView& view, std::span<const std::size_t> indices,
                            Matrix* targets = nullptr) {
    const auto& v = data.scaled;
    const std::size_t N = v.stations(), C = v.variables();
    const auto rows = static_cast<Eigen::Index>(indices.size() * N * C);
    Batch batch;
    batch.num_stations = N;
    batch.num_variables = C;
    batch.coords = data.coords;
    batch.history.resize(rows, static_cast<Eigen::Index>(view.history_len()));
    if (targets) targets->resize(rows, static_cast<Eigen::Index>(view.horizon_len()));
    batch.times.reserve(indices.size());
    Eigen::Index row = 0;
    for (std::size_t w : indices) {
        batch.times.push_back(view.time_feature(w));
        const std::size_t h0 = view.history_start(w), f0 = view.forecast_start(w);
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < C; ++c, ++row) {
                for (std::size_t k = 0; k < view.history_len(); ++k) {
                    batch.history(row, static_cast<Eigen::Index>(k)) = v(h0 + k, n, c);
                }
                if (targets) {
                    for (std::size_t k = 0; k < view.horizon_len(); ++k) {
                        (*targets)(row, static_cast<Eigen::Index>(k)) = v(f0 + k, n, c);
                    }
                }
            }
        }
    }
    return batch;
}

inline constexpr std::size_t kEvalChunk = 32;

/// Pooled metrics of `params` over every window of `range`, in original units.
inline Metrics evaluate(const ModelParams& params, const PreparedData& data, IndexRange range) {
    const auto view = data.windows(range);
    if (view.size() == 0) throw EvaluationError("split has no complete window");
    const std::size_t C = data.scaled.variables();
    MetricsAccumulator acc;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < view.size(); start += kEvalChunk) {
        idx.clear();
        for (std::size_t w = start; w < std::min(view.size(), start + kEvalChunk); ++w) idx.push_back(w);
        Matrix targets;
        const Batch batch = assemble_batch(data, view, idx, &targets);
        const Matrix pred = forward_rows(params, batch);
        for (Eigen::Index r = 0; r < pred.rows(); ++r) {
            const std::size_t c = static_cast<std::size_t>(r) % C;
            const double s = data.normalizer.stddev()[c];
            for (Eigen::Index k = 0; k < pred.cols(); ++k) {
                // Residuals are invariant to the mean shift, only the scale is undone.
                acc.add((pred(r, k) - targets(r, k)) * s);
            }
        }
    }
    return acc.result();
}

/// Forecast in original units for the window whose first forecast step has
/// absolute index `forecast_start` (needs T_h steps of history before it).
inline Tensor3 predict_at(const ModelParams& params, const PreparedData& data, std::size_t forecast_start) {
    const std::size_t th = data.history_len;
    if (forecast_start < th || forecast_start > data.scaled.steps()) {
        throw ValidationError("forecast start index " + std::to_string(forecast_start) + " leaves no room for " +
                              std::to_string(th) + " history steps");
    }
    const auto& v = data.scaled;
    Tensor3 history(th, v.stations(), v.variables());
    for (std::size_t k = 0; k < th; ++k) {
        for (std::size_t n = 0; n < v.stations(); ++n) {
            for (std::size_t c = 0; c < v.variables(); ++c) history(k, n, c) = v(forecast_start - th + k, n, c);
        }
    }
    const auto coords = data.obs.coords();
    const auto tf = time_feature(data.obs.timestamp_at(forecast_start));
    return data.normalizer.invert(forward(history, coords, tf, params));
}

struct EpochRecord {
    int epoch = 0;
    double train_mae = 0.0;  // original units
    double val_mae = 0.0;
    double val_mse = 0.0;
    double seconds = 0.0;
};

struct FitResult {
    ModelParams best;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_mae = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains from `init`. Returns the parameters with the lowest validation MAE.
inline FitResult fit(ModelParams init, const PreparedData& data, const TrainConfig& cfg,
                     const EpochCallback& on_epoch = {}) {
    cfg.validate();
    const auto train = data.windows(data.splits.train);
    if (train.size() == 0) throw TrainingError("training split has no complete window");
    if (data.windows(data.splits.val).size() == 0) throw TrainingError("validation split has no complete window");

    ModelParams params = std::move(init);
    ModelParams grads = ModelParams::zeros(params.config);
    std::vector<AdamState> states;
    for (const auto& t : tensors(params)) states.emplace_back(t.values.size());

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const std::size_t C = data.scaled.variables();
    FitResult result;
    result.best = params;
    result.best_val_mae = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);
        MetricsAccumulator train_acc;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::span<const std::size_t> idx(order.data() + start,
                                                   std::min(cfg.batch_size, order.size() - start));
            Matrix targets;
            const Batch batch = assemble_batch(data, train, idx, &targets);
            ForwardCache cache;
            const Matrix pred = forward_rows(params, batch, &cache);
            Matrix grad_pred;
            const double loss = mae_loss_rows(pred, targets, &grad_pred);
            if (!std::isfinite(loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
            for (Eigen::Index r = 0; r < pred.rows(); ++r) {
                const double s = data.normalizer.stddev()[static_cast<std::size_t>(r) % C];
                for (Eigen::Index k = 0; k < pred.cols(); ++k) train_acc.add((pred(r, k) - targets(r, k)) * s);
            }

            for (auto& g : tensors(grads)) std::fill(g.values.begin(), g.values.end(), 0.0);
            backward_rows(params, cache, grad_pred, grads);

            auto p_refs = tensors(params);
            const auto g_refs = tensors(std::as_const(grads));
            try {
                for (std::size_t i = 0; i < p_refs.size(); ++i) {
                    adam_step(p_refs[i].values, g_refs[i].values, states[i], cfg.lr, p_refs[i].name);
                }
            } catch (const OptimizerError& e) {
                throw TrainingError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                                    std::to_string(batch_index));
            }
        }

        const Metrics val = evaluate(params, data, data.splits.val);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_mae = train_acc.result().mae;
        rec.val_mae = val.mae;
        rec.val_mse = val.mse;
        if (cfg.record_seconds) {
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (!std::isfinite(val.mae)) {
            throw TrainingError("non-finite validation MAE at epoch " + std::to_string(epoch));
        }
        if (val.mae < result.best_val_mae) {
            result.best_val_mae = val.mae;
            result.best_epoch = epoch;
            result.best = params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

inline void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write '" + path.string() + "'");
    out << "epoch,train_mae,val_mae,val_mse,seconds\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << csv::format_double(r.train_mae) << ',' << csv::format_double(r.val_mae) << ','
            << csv::format_double(r.val_mse) << ',' << csv::format_double(r.seconds) << '\n';
    }
}

inline std::vector<EpochRecord> load_history_csv(const std::filesystem::path& path) {
    csv::Reader reader(path);
    std::string line;
    if (!reader.next(line) ||
        csv::split(line) != std::vector<std::string>{"epoch", "train_mae", "val_mae", "val_mse", "seconds"}) {
        reader.fail("expected header epoch,train_mae,val_mae,val_mse,seconds");
    }
    std::vector<EpochRecord> out;
    while (reader.next(line)) {
        const auto f = csv::split(line);
        if (f.size() != 5) reader.fail("expected 5 fields");
        std::array<double, 5> v{};
        for (std::size_t i = 0; i < 5; ++i) {
            const auto x = csv::parse_double(f[i]);
            if (!x) reader.fail("unparsable field '" + f[i] + "'");
            v[i] = *x;
        }
        out.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4]});
    }
    return out;
}

}  // namespace lightweather
