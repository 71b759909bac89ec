#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "g4ds/nets/conv_net.hpp"

namespace g4ds::nets {

/// Bijective feature network on 32 channels: additive coupling blocks with a
/// half-swap channel permutation between blocks. Each block splits channels
/// into halves (A,B), updates B <- B + f(A) and emits (B', A); the swap is its
/// own inverse, so with the even block count and zero-initialized subnets the
/// whole network starts as the identity. Images enter by zero-padding 3
/// channels to 32 and leave through the first 3 channels of the inverse.
class RevNet {
public:
    static constexpr std::size_t kChannels = 32;
    static constexpr std::size_t kHalf = 16;
    static constexpr std::size_t kBlocks = 8;

    RevNet() = default;

    RevNet(const std::string& name, Rng& rng) {
        for (std::size_t k = 0; k < kBlocks; ++k) {
            blocks_.emplace_back(name + ".block" + std::to_string(k),
                                 std::vector<ConvSpec>{{kHalf, 32, 3, 1, 1}, {32, kHalf, 1, 1, 0}},
                                 rng, /*zero_last=*/true);
        }
    }

    /// Coupling cascade on a full {32,H,W} tensor.
    Var forward_feature(Tape& t, Var z) {
        for (std::size_t k = 0; k < kBlocks; ++k) {
            Var a = t.slice_channels(z, 0, kHalf);
            Var b = t.slice_channels(z, kHalf, kChannels);
            Var b2 = t.add(b, blocks_[k].forward(t, a));
            z = t.concat_channels(b2, a);
        }
        return z;
    }

    /// Exact inverse of forward_feature.
    Var inverse_feature(Tape& t, Var z) {
        for (std::size_t k = kBlocks; k-- > 0;) {
            Var p = t.slice_channels(z, 0, kHalf);
            Var q = t.slice_channels(z, kHalf, kChannels);
            Var b = t.sub(p, blocks_[k].forward(t, q));
            z = t.concat_channels(q, b);
        }
        return z;
    }

    /// Image {3,H,W} in [0,1] -> feature {32,H,W}. Rejects non-finite input.
    Var forward_image(Tape& t, Var image) {
        const Tensor& img = t.value(image);
        if (!img.all_finite()) throw std::invalid_argument("revnet: non-finite image input");
        const std::size_t H = img.dim(1), W = img.dim(2);
        Var pad = t.constant(Tensor::zeros({kChannels - 3, H, W}));
        return forward_feature(t, t.concat_channels(image, pad));
    }

    /// Feature {32,H,W} -> image {3,H,W}, unclamped. Callers clamp to [0,1]
    /// only when emitting files.
    Var inverse_image(Tape& t, Var feature) {
        return t.slice_channels(inverse_feature(t, feature), 0, 3);
    }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        for (auto& b : blocks_) {
            auto sub = b.parameters();
            ps.insert(ps.end(), sub.begin(), sub.end());
        }
        return ps;
    }

    ConvNet& block(std::size_t k) { return blocks_[k]; }

private:
    std::vector<ConvNet> blocks_;
};

} // namespace g4ds::nets
