#pragma once

#include <span>
#include <vector>

#include "cgprune/nn/adam.hpp"
#include "cgprune/nn/dense.hpp"
#include "cgprune/nn/loss.hpp"

namespace cgprune::nn {

// Plain feed-forward stack ending in softmax over the last layer's outputs.
template <typename Scalar>
struct Mlp {
    std::vector<DenseLayer<Scalar>> layers;

    // widths = {in, hidden..., classes}; hidden layers use `hidden`, the last none.
    static Mlp make(std::span<const Eigen::Index> widths, Activation hidden, Rng& rng) {
        Mlp net;
        for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
            bool last = k + 2 == widths.size();
            net.layers.emplace_back(widths[k], widths[k + 1], last ? Activation::None : hidden);
            init_uniform(net.layers.back(), rng);
        }
        return net;
    }
};

template <typename Scalar>
struct LossAndGrad {
    Scalar loss = 0;
    std::vector<DenseGrad<Scalar>> grads;
};

template <typename Scalar, typename Derived>
Vector<Scalar> logits(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
    Vector<Scalar> h = x;
    for (const auto& layer : net.layers) h = forward(layer, h);
    return h;
}

template <typename Scalar, typename Derived>
Vector<Scalar> predict(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x) {
    return softmax(logits(net, x));
}

// Cross-entropy loss of one example and its gradient for every layer.
template <typename Scalar, typename Derived>
LossAndGrad<Scalar> backward(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& x, Eigen::Index label) {
    std::vector<Vector<Scalar>> inputs;
    std::vector<Vector<Scalar>> pre;
    Vector<Scalar> h = x;
    for (const auto& layer : net.layers) {
        inputs.push_back(h);
        pre.push_back(pre_activation(layer, h));
        h = pre.back();
        apply_activation(layer.activation, h);
    }
    Vector<Scalar> prob = softmax(h);

    LossAndGrad<Scalar> out;
    out.loss = cross_entropy(prob, label);
    for (const auto& layer : net.layers) out.grads.emplace_back(layer);
    Vector<Scalar> upstream = softmax_xent_grad(prob, label);
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        upstream = backward(net.layers[k], inputs[k], pre[k], upstream, out.grads[k]);
    }
    return out;
}

template <typename Scalar>
std::vector<ParamView<Scalar>> param_views(Mlp<Scalar>& net) {
    std::vector<ParamView<Scalar>> views;
    for (auto& layer : net.layers) {
        views.push_back(view(layer.weight));
        views.push_back(view(layer.bias));
    }
    return views;
}

template <typename Scalar>
std::vector<ConstParamView<Scalar>> grad_views(const std::vector<DenseGrad<Scalar>>& grads) {
    std::vector<ConstParamView<Scalar>> views;
    for (const auto& g : grads) {
        views.push_back(cview(g.weight));
        views.push_back(cview(g.bias));
    }
    return views;
}

}  // namespace cgprune::nn
