#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

#include "cgprune/error.hpp"
#include "cgprune/nn/adam.hpp"

namespace cgprune::nn {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_block = 0;
    Eigen::Index worst_index = 0;
    std::size_t checked = 0;
};

// Compares analytic gradients against central differences of `loss()`, which
// must re-evaluate the objective from the current contents of `params`. Each
// entry is perturbed by +-h and restored. Relative error is
// |a - n| / max(|a|, |n|, floor).
template <typename Scalar, typename LossFn>
GradCheckResult check_gradients(std::span<const ParamView<Scalar>> params,
                                std::span<const ConstParamView<Scalar>> analytic, LossFn&& loss,
                                Scalar h = Scalar(1e-4), Scalar floor = Scalar(1e-8)) {
    if (params.size() != analytic.size()) throw ShapeError("gradcheck: block counts differ");
    GradCheckResult result;
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].size != analytic[b].size) throw ShapeError("gradcheck: block size mismatch");
        for (Eigen::Index i = 0; i < params[b].size; ++i) {
            Scalar& p = params[b].data[i];
            const Scalar saved = p;
            p = saved + h;
            const Scalar up = loss();
            p = saved - h;
            const Scalar down = loss();
            p = saved;

            const Scalar numeric = (up - down) / (Scalar(2) * h);
            const Scalar exact = analytic[b].data[i];
            const Scalar denom = std::max({std::abs(exact), std::abs(numeric), floor});
            const double rel = static_cast<double>(std::abs(exact - numeric) / denom);
            ++result.checked;
            if (rel > result.max_relative_error) {
                result.max_relative_error = rel;
                result.worst_block = b;
                result.worst_index = i;
            }
        }
    }
    return result;
}

}  // namespace cgprune::nn
