#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cgprune/error.hpp"
#include "cgprune/nn/dense.hpp"

namespace cgprune::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Flat, mutable view of one parameter block (a weight matrix or a bias).
template <typename Scalar>
struct ParamView {
    Scalar* data = nullptr;
    Eigen::Index size = 0;

    Eigen::Map<Vector<Scalar>> map() const { return {data, size}; }
};

template <typename Scalar>
struct ConstParamView {
    const Scalar* data = nullptr;
    Eigen::Index size = 0;

    Eigen::Map<const Vector<Scalar>> map() const { return {data, size}; }
};

template <typename Scalar>
ParamView<Scalar> view(Matrix<Scalar>& m) { return {m.data(), m.size()}; }
template <typename Scalar>
ParamView<Scalar> view(Vector<Scalar>& v) { return {v.data(), v.size()}; }
template <typename Scalar>
ConstParamView<Scalar> cview(const Matrix<Scalar>& m) { return {m.data(), m.size()}; }
template <typename Scalar>
ConstParamView<Scalar> cview(const Vector<Scalar>& v) { return {v.data(), v.size()}; }

template <typename Scalar>
struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Vector<Scalar>> m;
    std::vector<Vector<Scalar>> v;

    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : config(cfg) {}
};

// One bias-corrected Adam update over every parameter block. Moments are
// allocated on the first call and must keep their shapes afterwards.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, std::span<const ParamView<Scalar>> params,
               std::span<const ConstParamView<Scalar>> grads) {
    if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient block counts differ");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.push_back(Vector<Scalar>::Zero(p.size));
            state.v.push_back(Vector<Scalar>::Zero(p.size));
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam: parameter block count changed");

    ++state.step;
    const auto& c = state.config;
    const Scalar b1 = static_cast<Scalar>(c.beta1);
    const Scalar b2 = static_cast<Scalar>(c.beta2);
    const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
    const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
    const Scalar lr = static_cast<Scalar>(c.lr);
    const Scalar eps = static_cast<Scalar>(c.epsilon);

    for (std::size_t k = 0; k < params.size(); ++k) {
        if (params[k].size != grads[k].size || state.m[k].size() != params[k].size) {
            throw ShapeError("adam: block " + std::to_string(k) + " shape mismatch");
        }
        auto p = params[k].map();
        auto g = grads[k].map();
        auto& m = state.m[k];
        auto& v = state.v[k];
        m = b1 * m + (Scalar(1) - b1) * g;
        v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
        p.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
    }
}

}  // namespace cgprune::nn
