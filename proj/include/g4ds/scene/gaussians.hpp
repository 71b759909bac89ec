#pragma once

#include <cmath>
#include <cstddef>

#include "g4ds/core/tape.hpp"

namespace g4ds::scene {

inline constexpr std::size_t kFeatureDim = 32;

/// Canonical Gaussian set, struct-of-arrays over trainable parameters.
/// Scales are stored in log space (s = exp(log_scale) > 0 by construction);
/// opacity as a logit (sigma = sigmoid(logit) in (0,1)); the 32-dim feature
/// is the degree-0 embedding coefficient.
struct GaussianCloud {
    Parameter centers;        // {N,3}
    Parameter log_scales;     // {N,3}
    Parameter rotations;      // {N,4} unit quaternions (w,x,y,z)
    Parameter opacity_logits; // {N,1}
    Parameter features;       // {N,32}

    GaussianCloud() = default;

    explicit GaussianCloud(std::size_t n)
        : centers("gaussians.centers", Tensor::zeros({n, 3})),
          log_scales("gaussians.log_scales", Tensor::zeros({n, 3})),
          rotations("gaussians.rotations", Tensor::zeros({n, 4})),
          opacity_logits("gaussians.opacity_logits", Tensor::zeros({n, 1})),
          features("gaussians.features", Tensor::zeros({n, kFeatureDim})) {
        for (std::size_t i = 0; i < n; ++i) rotations.value.at(i, 0) = 1.0;
    }

    std::size_t size() const { return centers.value.numel() / 3; }

    /// Restores exact unit norm after an optimizer step.
    void renormalize_rotations() {
        const std::size_t n = size();
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < 4; ++c) s += rotations.value.at(i, c) * rotations.value.at(i, c);
            const double inv = 1.0 / std::sqrt(s);
            for (std::size_t c = 0; c < 4; ++c) rotations.value.at(i, c) *= inv;
        }
    }

    std::vector<Parameter*> parameters() {
        return {&centers, &log_scales, &rotations, &opacity_logits, &features};
    }
};

} // namespace g4ds::scene
