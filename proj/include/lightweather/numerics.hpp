#pragma once

// Dense primitives shared by the model: matrices, the fully connected layer
// with its hand-derived backward rule, ReLU, Adam and a central-difference
// gradient checker. Storage and products are backed by Eigen; every
// derivative below is written out explicitly.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lightweather/errors.hpp"

namespace lightweather {

/// Row-major dense matrix of 64-bit reals.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

inline bool all_finite(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline std::span<double> as_span(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
inline std::span<const double> as_span(const Matrix& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
inline std::span<double> as_span(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<const double> as_span(const Vector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Dense rank-3 tensor indexed (time, station, variable), row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t steps, std::size_t stations, std::size_t variables, double fill = 0.0)
        : steps_(steps), stations_(stations), variables_(variables),
          data_(steps * stations * variables, fill) {}

    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] std::size_t stations() const noexcept { return stations_; }
    [[nodiscard]] std::size_t variables() const noexcept { return variables_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t t, std::size_t n, std::size_t c) {
        return data_[(t * stations_ + n) * variables_ + c];
    }
    double operator()(std::size_t t, std::size_t n, std::size_t c) const {
        return data_[(t * stations_ + n) * variables_ + c];
    }

    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    [[nodiscard]] bool same_shape(const Tensor3& other) const noexcept {
        return steps_ == other.steps_ && stations_ == other.stations_ && variables_ == other.variables_;
    }

    [[nodiscard]] std::string shape() const {
        return std::to_string(steps_) + "x" + std::to_string(stations_) + "x" + std::to_string(variables_);
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t steps_ = 0;
    std::size_t stations_ = 0;
    std::size_t variables_ = 0;
    std::vector<double> data_;
};

/// Fully connected layer y = W x + b with W stored d_out x d_in.
struct LinearLayer {
    Matrix weight;
    Vector bias;

    LinearLayer() = default;
    LinearLayer(Eigen::Index d_in, Eigen::Index d_out)
        : weight(Matrix::Zero(d_out, d_in)), bias(Vector::Zero(d_out)) {}

    [[nodiscard]] Eigen::Index in_features() const noexcept { return weight.cols(); }
    [[nodiscard]] Eigen::Index out_features() const noexcept { return weight.rows(); }
    [[nodiscard]] bool empty() const noexcept { return weight.size() == 0; }
    [[nodiscard]] std::size_t parameter_count() const noexcept {
        return static_cast<std::size_t>(weight.size() + bias.size());
    }

    void set_zero() {
        weight.setZero();
        bias.setZero();
    }
};

struct LinearGrads {
    Vector grad_x;
    Matrix grad_weight;
    Vector grad_bias;
};

inline void check_layer(const LinearLayer& layer) {
    if (layer.bias.size() != layer.weight.rows()) {
        throw ShapeError("linear layer bias length " + std::to_string(layer.bias.size()) +
                         " does not match weight " + shape_string(layer.weight.rows(), layer.weight.cols()));
    }
}

inline Vector linear_forward(const Vector& x, const LinearLayer& layer) {
    check_layer(layer);
    if (x.size() != layer.in_features()) {
        throw ShapeError("linear_forward: input length " + std::to_string(x.size()) + ", layer expects " +
                         std::to_string(layer.in_features()));
    }
    return layer.weight * x + layer.bias;
}

inline LinearGrads linear_backward(const Vector& x, const LinearLayer& layer, const Vector& grad_out) {
    check_layer(layer);
    if (x.size() != layer.in_features() || grad_out.size() != layer.out_features()) {
        throw ShapeError("linear_backward: got x[" + std::to_string(x.size()) + "], grad_out[" +
                         std::to_string(grad_out.size()) + "] for layer " +
                         shape_string(layer.weight.rows(), layer.weight.cols()));
    }
    LinearGrads g;
    g.grad_weight = grad_out * x.transpose();
    g.grad_bias = grad_out;
    g.grad_x = layer.weight.transpose() * grad_out;
    return g;
}

/// Batched forward: each row of `x` is one input vector. Returns rows x d_out.
inline Matrix linear_forward_rows(const Matrix& x, const LinearLayer& layer) {
    check_layer(layer);
    if (x.cols() != layer.in_features()) {
        throw ShapeError("linear_forward: input width " + std::to_string(x.cols()) + ", layer expects " +
                         std::to_string(layer.in_features()));
    }
    Matrix y(x.rows(), layer.out_features());
    y.noalias() = x * layer.weight.transpose();
    y.rowwise() += layer.bias.transpose();
    return y;
}

/// Batched backward. Adds dL/dW and dL/db into `grads` and returns dL/dx.
inline Matrix linear_backward_rows(const Matrix& x, const LinearLayer& layer, const Matrix& grad_out,
                                   LinearLayer& grads, bool need_grad_x = true) {
    if (grad_out.rows() != x.rows() || grad_out.cols() != layer.out_features() ||
        x.cols() != layer.in_features()) {
        throw ShapeError("linear_backward: x " + shape_string(x.rows(), x.cols()) + ", grad_out " +
                         shape_string(grad_out.rows(), grad_out.cols()) + " for layer " +
                         shape_string(layer.weight.rows(), layer.weight.cols()));
    }
    grads.weight.noalias() += grad_out.transpose() * x;
    grads.bias += grad_out.colwise().sum().transpose();
    if (!need_grad_x) return {};
    Matrix grad_x(x.rows(), x.cols());
    grad_x.noalias() = grad_out * layer.weight;
    return grad_x;
}

/// Elementwise ReLU.
template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
    return x.cwiseMax(0.0).eval();
}

/// Passes the upstream gradient where the pre-activation is strictly positive.
/// The subgradient at exactly zero is taken as zero.
template <typename DerivedX, typename DerivedG>
auto relu_backward(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedG>& grad_out) {
    if (x.rows() != grad_out.rows() || x.cols() != grad_out.cols()) {
        throw ShapeError("relu_backward: shape mismatch");
    }
    return (x.array() > 0.0).select(grad_out.array(), 0.0).matrix().eval();
}

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment estimates for one parameter array.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    AdamOptions options;

    AdamState() = default;
    explicit AdamState(std::size_t size, AdamOptions opts = {})
        : m(size, 0.0), v(size, 0.0), options(opts) {}
};

/// One bias-corrected Adam update. A non-finite gradient aborts the step
/// before anything is modified.
inline void adam_step(std::span<double> param, std::span<const double> grad, AdamState& state, double lr,
                      std::string_view name = "parameter") {
    if (param.size() != grad.size() || state.m.size() != param.size() || state.v.size() != param.size()) {
        throw ShapeError("adam_step: size mismatch for '" + std::string(name) + "'");
    }
    if (!all_finite(grad)) {
        throw OptimizerError("non-finite gradient for '" + std::string(name) + "'");
    }
    const auto& o = state.options;
    ++state.step;
    const double correction1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
    const double correction2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
        state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g * g;
        const double m_hat = state.m[i] / correction1;
        const double v_hat = state.v[i] / correction2;
        param[i] -= lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
}

struct ParamRef {
    std::string name;
    std::span<double> values;
};

struct GradRef {
    std::string name;
    std::span<const double> values;
};

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Compares analytic gradients against central differences of `loss`, one
/// coordinate at a time. Each entry is restored after probing.
template <typename LossFn>
GradientCheckReport finite_diff_check(LossFn&& loss, std::span<const ParamRef> params,
                                      std::span<const GradRef> analytic, double perturbation) {
    if (!(perturbation >= 1e-6 && perturbation <= 1e-4)) {
        throw ValidationError("finite_diff_check: perturbation must lie in [1e-6, 1e-4]");
    }
    if (params.size() != analytic.size()) {
        throw ShapeError("finite_diff_check: parameter/gradient list length mismatch");
    }
    GradientCheckReport report;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto values = params[p].values;
        auto grads = analytic[p].values;
        if (values.size() != grads.size()) {
            throw ShapeError("finite_diff_check: gradient size mismatch for '" + params[p].name + "'");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + perturbation;
            const double up = loss();
            values[i] = saved - perturbation;
            const double down = loss();
            values[i] = saved;
            const double fd = (up - down) / (2.0 * perturbation);
            const double a = grads[i];
            const double denom = std::max({std::abs(a), std::abs(fd), 1e-8});
            const double err = std::abs(a - fd) / denom;
            ++report.checked;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_parameter = params[p].name;
                report.worst_index = i;
            }
        }
    }
    return report;
}

}  // namespace lightweather
