#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "cgprune/error.hpp"
#include "cgprune/nn/rng.hpp"

namespace cgprune::nn {

enum class Activation { None, ReLU };

inline std::string_view to_string(Activation a) { return a == Activation::ReLU ? "relu" : "none"; }

inline Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "none") return Activation::None;
    throw ConfigError("unknown activation: " + std::string(s));
}

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// y = activation(W x + b), W is (out x in).
template <typename Scalar>
struct DenseLayer {
    Matrix<Scalar> weight;
    Vector<Scalar> bias;
    Activation activation = Activation::None;

    DenseLayer() = default;
    DenseLayer(Eigen::Index in, Eigen::Index out, Activation act)
        : weight(Matrix<Scalar>::Zero(out, in)), bias(Vector<Scalar>::Zero(out)), activation(act) {}

    Eigen::Index in() const noexcept { return weight.cols(); }
    Eigen::Index out() const noexcept { return weight.rows(); }
};

template <typename Scalar>
struct DenseGrad {
    Matrix<Scalar> weight;
    Vector<Scalar> bias;

    DenseGrad() = default;
    explicit DenseGrad(const DenseLayer<Scalar>& layer)
        : weight(Matrix<Scalar>::Zero(layer.out(), layer.in())), bias(Vector<Scalar>::Zero(layer.out())) {}
};

template <typename Derived>
void apply_activation(Activation act, Eigen::MatrixBase<Derived>& z) {
    if (act == Activation::ReLU) z = z.cwiseMax(typename Derived::Scalar(0));
}

template <typename Scalar, typename Derived>
Vector<Scalar> pre_activation(const DenseLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& x) {
    if (x.size() != layer.in()) {
        throw ShapeError("dense layer expects " + std::to_string(layer.in()) + " inputs, got " +
                         std::to_string(x.size()));
    }
    return layer.weight * x + layer.bias;
}

template <typename Scalar, typename Derived>
Vector<Scalar> forward(const DenseLayer<Scalar>& layer, const Eigen::MatrixBase<Derived>& x) {
    Vector<Scalar> z = pre_activation(layer, x);
    apply_activation(layer.activation, z);
    return z;
}

// Accumulates dL/dW and dL/db into grad and returns dL/dx, given the layer
// input x, its pre-activation z and the upstream gradient dL/dy.
template <typename Scalar, typename DX, typename DZ, typename DY>
Vector<Scalar> backward(const DenseLayer<Scalar>& layer, const Eigen::MatrixBase<DX>& x,
                        const Eigen::MatrixBase<DZ>& z, const Eigen::MatrixBase<DY>& upstream,
                        DenseGrad<Scalar>& grad) {
    Vector<Scalar> dz = upstream;
    if (layer.activation == Activation::ReLU) {
        for (Eigen::Index i = 0; i < dz.size(); ++i) {
            if (!(z[i] > Scalar(0))) dz[i] = Scalar(0);
        }
    }
    grad.weight.noalias() += dz * x.transpose();
    grad.bias += dz;
    return layer.weight.transpose() * dz;
}

// Uniform on [-1/sqrt(fan_in), +1/sqrt(fan_in)] for weights and biases.
template <typename Scalar>
void init_uniform(DenseLayer<Scalar>& layer, Rng& rng) {
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(std::max<Eigen::Index>(layer.in(), 1)));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = rng.uniform<Scalar>(-bound, bound);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = rng.uniform<Scalar>(-bound, bound);
}

template <typename Scalar>
bool all_finite(const DenseLayer<Scalar>& layer) {
    return layer.weight.allFinite() && layer.bias.allFinite();
}

}  // namespace cgprune::nn
