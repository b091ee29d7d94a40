#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "cgprune/error.hpp"
#include "cgprune/nn/dense.hpp"

namespace cgprune::nn {

inline constexpr double kProbFloor = 1e-12;

// Max-subtracted softmax; throws NumericError on non-finite logits.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    if (z.size() < 1) throw ShapeError("softmax of an empty vector");
    if (!z.allFinite()) throw NumericError("softmax input is not finite");
    Vector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
    return e / e.sum();
}

// -ln(max(prob[label], 1e-12)).
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& prob, Eigen::Index label) {
    using Scalar = typename Derived::Scalar;
    if (label < 0 || label >= prob.size()) {
        throw IndexError("label " + std::to_string(label) + " out of range for " + std::to_string(prob.size()) +
                         " classes");
    }
    return -std::log(std::max(prob[label], static_cast<Scalar>(kProbFloor)));
}

// d(cross_entropy(softmax(z)))/dz = softmax(z) - onehot(label). The floor only
// guards the logarithm, so the unclamped gradient is used everywhere.
template <typename Derived>
Vector<typename Derived::Scalar> softmax_xent_grad(const Eigen::MatrixBase<Derived>& prob, Eigen::Index label) {
    Vector<typename Derived::Scalar> g = prob;
    g[label] -= 1;
    return g;
}

}  // namespace cgprune::nn
