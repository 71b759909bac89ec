#pragma once

#include <string>
#include <vector>

#include "g4ds/nets/conv_net.hpp"

namespace g4ds::nets {

/// Guided propagation: a small conv stack predicts per-pixel 3x3 kernels from
/// a guidance image; the kernels are normalized to a convex combination by a
/// temperature-scaled softmax over all nine taps (center included, so the
/// identity kernel is reachable) and applied for K diffusion rounds with
/// replicate borders. The final prediction layer starts at zero weights with
/// a positive center-logit bias, so propagation begins near the identity.
class Cspn {
public:
    static constexpr int kDefaultIterations = 3;
    static constexpr double kCenterBiasInit = 6.0;

    Cspn() = default;

    Cspn(const std::string& name, Rng& rng)
        : temperature_(name + ".temperature", Tensor({1}, {1.0})) {
        guidance_net_ = ConvNet(
            name + ".guidance",
            {{3, 16, 3, 1, 1}, {16, 16, 3, 1, 1}, {16, 9, 1, 1, 0}}, rng, /*zero_last=*/true);
        guidance_net_.bias(2).value[4] = kCenterBiasInit; // tap (0,0)
    }

    /// Per-pixel kernels {9,H,W}; channel k is tap (dy,dx) with
    /// k = (dy+1)*3 + (dx+1). Each pixel's nine weights sum to 1.
    Var kernels(Tape& t, Var guidance) {
        Var logits = guidance_net_.forward(t, guidance);
        const Tensor& tl = t.value(logits);
        Var temp = t.param(temperature_);
        // Broadcast the scalar to the logit shape, then softmax per pixel.
        Var tiled = t.custom(
            Tensor::full(tl.shape(), t.value(temp)[0]), {temp.id}, [](Tape& tp, int id) {
                const auto& n = tp.node(id);
                const Tensor& g = n.grad;
                double acc = 0.0;
                for (std::size_t i = 0; i < g.numel(); ++i) acc += g[i];
                tp.grad_mut(n.parents[0])[0] += acc;
            });
        return t.softmax_channels(t.mul(logits, tiled));
    }

    /// K rounds of kernel-weighted diffusion of an image {C,H,W}.
    static Var apply(Tape& t, Var image, Var kernels, int iterations) {
        const Tensor& img = t.value(image);
        const int H = static_cast<int>(img.dim(1));
        const int W = static_cast<int>(img.dim(2));
        Var out = image;
        for (int it = 0; it < iterations; ++it) {
            Var padded = replicate_pad(t, out, 1);
            Var acc;
            for (int k = 0; k < 9; ++k) {
                const int dy = k / 3 - 1, dx = k % 3 - 1;
                Var shifted = slice_spatial(t, padded, 1 + dy, 1 + dx, H, W);
                Var term = t.mul_spatial(shifted, t.slice_channels(kernels, k, k + 1));
                acc = (k == 0) ? term : t.add(acc, term);
            }
            out = acc;
        }
        return out;
    }

    /// Filter `image` under `guidance` (both {3,H,W}).
    Var propagate(Tape& t, Var image, Var guidance, int iterations = kDefaultIterations) {
        return apply(t, image, kernels(t, guidance), iterations);
    }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps = guidance_net_.parameters();
        ps.push_back(&temperature_);
        return ps;
    }

private:
    ConvNet guidance_net_;
    Parameter temperature_;
};

} // namespace g4ds::nets
