#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include "lightweather/lightweather.hpp"

namespace lwtest {

namespace fs = std::filesystem;

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("lightweather_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const fs::path& path() const noexcept { return path_; }
    [[nodiscard]] fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline lightweather::Tensor3 random_tensor(std::size_t t, std::size_t n, std::size_t c, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    lightweather::Tensor3 out(t, n, c);
    for (double& v : out.values()) v = g(rng);
    return out;
}

inline std::vector<lightweather::StationCoord> random_coords(std::size_t n, std::uint64_t seed) {
    std::vector<lightweather::StationCoord> out;
    for (const auto& s : lightweather::random_stations(n, seed)) out.push_back(s.coord);
    return out;
}

/// Small noise-free synthetic set with alpha = 0 and the given geometry.
inline lightweather::ObservationSet small_synthetic(std::size_t stations, std::size_t steps, std::size_t history,
                                                    std::size_t horizon, std::uint64_t seed = 3) {
    lightweather::SynthConfig cfg;
    cfg.n_stations = stations;
    cfg.n_steps = steps;
    cfg.alpha.assign(history, 0.0);
    cfg.horizon_len = horizon;
    cfg.seed = seed;
    return lightweather::generate(cfg, lightweather::random_stations(stations, seed));
}

/// Gradient check of the full model under a squared-error loss on a random
/// batch of `samples` windows. Every tensor is probed.
inline lightweather::GradientCheckReport model_gradient_check(const lightweather::ModelConfig& cfg,
                                                              std::size_t stations, std::size_t samples,
                                                              std::uint64_t seed, double h = 1e-6) {
    using namespace lightweather;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> hour(0, 23), day(0, 30), month(0, 11);

    ModelParams params = init_params(cfg, seed);
    Batch batch;
    batch.num_stations = stations;
    batch.num_variables = static_cast<std::size_t>(cfg.num_variables);
    const auto coords = random_coords(stations, seed + 1);
    batch.coords = coord_matrix(coords);
    const auto rows = static_cast<Eigen::Index>(samples * stations * batch.num_variables);
    batch.history.resize(rows, cfg.history_len);
    for (Eigen::Index i = 0; i < batch.history.size(); ++i) batch.history.data()[i] = g(rng);
    for (std::size_t s = 0; s < samples; ++s) batch.times.push_back({hour(rng), day(rng), month(rng)});
    Matrix target(rows, cfg.horizon_len);
    for (Eigen::Index i = 0; i < target.size(); ++i) target.data()[i] = g(rng);

    const double scale = 1.0 / static_cast<double>(target.size());
    auto loss = [&] {
        const Matrix pred = forward_rows(params, batch);
        return 0.5 * (pred - target).squaredNorm() * scale;
    };
    ForwardCache cache;
    const Matrix pred = forward_rows(params, batch, &cache);
    ModelParams grads = ModelParams::zeros(params.config);
    backward_rows(params, cache, ((pred - target) * scale).eval(), grads);

    std::vector<ParamRef> p_refs;
    std::vector<GradRef> g_refs;
    for (auto& t : tensors(params)) p_refs.push_back({t.name, t.values});
    for (const auto& t : tensors(std::as_const(grads))) g_refs.push_back({t.name, t.values});
    return finite_diff_check(loss, p_refs, g_refs, h);
}

}  // namespace lwtest
