#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "g4ds/nets/conv_net.hpp"

namespace g4ds::nets {

/// Frozen convolutional pyramid used as the perceptual feature extractor for
/// the art losses and the feature-distance metric. Three stride-2 stages of
/// widths 16/32/64; weights are drawn once from a fixed seed and never appear
/// in any optimizer group.
class FrozenEncoder {
public:
    static constexpr std::uint64_t kSeed = 0x5EED;

    FrozenEncoder() {
        Rng rng(kSeed);
        net_ = ConvNet("frozen_enc",
                       {{3, 16, 3, 2, 1}, {16, 32, 3, 2, 1}, {32, 64, 3, 2, 1}}, rng);
    }

    /// Stage activations (post-ReLU) for an image {3,H,W}.
    std::array<Var, 3> stages(Tape& t, Var image) {
        Var s0 = t.relu(conv2d(t, image, t.constant(net_.weight(0).value),
                               t.constant(net_.bias(0).value), 2, 1));
        Var s1 = t.relu(conv2d(t, s0, t.constant(net_.weight(1).value),
                               t.constant(net_.bias(1).value), 2, 1));
        Var s2 = t.relu(conv2d(t, s1, t.constant(net_.weight(2).value),
                               t.constant(net_.bias(2).value), 2, 1));
        return {s0, s1, s2};
    }

    /// FNV-1a over the raw weight bytes; pinned by tests to catch any drift
    /// in the deterministic initialization.
    std::uint64_t weight_hash() const {
        std::uint64_t h = 1469598103934665603ull;
        auto feed = [&h](const Tensor& t) {
            const unsigned char* p = reinterpret_cast<const unsigned char*>(t.data());
            for (std::size_t i = 0; i < t.numel() * sizeof(double); ++i) {
                h ^= p[i];
                h *= 1099511628211ull;
            }
        };
        for (std::size_t l = 0; l < 3; ++l) {
            feed(net_.weight(l).value);
            feed(net_.bias(l).value);
        }
        return h;
    }

private:
    ConvNet net_;
};

} // namespace g4ds::nets
