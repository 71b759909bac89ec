#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "g4ds/core/conv.hpp"
#include "g4ds/core/rng.hpp"
#include "g4ds/core/tape.hpp"

namespace g4ds::nets {

struct ConvSpec {
    std::size_t in = 0, out = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;
};

/// Plain convolution stack with ReLU between layers, on {C,H,W} tensors.
class ConvNet {
public:
    ConvNet() = default;

    ConvNet(const std::string& name, const std::vector<ConvSpec>& specs, Rng& rng,
            bool zero_last = false) {
        specs_ = specs;
        for (std::size_t l = 0; l < specs.size(); ++l) {
            const auto& s = specs[l];
            const double he =
                std::sqrt(2.0 / static_cast<double>(s.in * static_cast<std::size_t>(s.kernel * s.kernel)));
            const bool last = l + 1 == specs.size();
            Tensor w = (last && zero_last)
                           ? Tensor::zeros({s.out, s.in, static_cast<std::size_t>(s.kernel),
                                            static_cast<std::size_t>(s.kernel)})
                           : Tensor::randn({s.out, s.in, static_cast<std::size_t>(s.kernel),
                                            static_cast<std::size_t>(s.kernel)},
                                           rng, he);
            weights_.emplace_back(name + ".w" + std::to_string(l), std::move(w));
            biases_.emplace_back(name + ".b" + std::to_string(l), Tensor::zeros({s.out}));
        }
    }

    Var forward(Tape& t, Var x) {
        Var h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            h = conv2d(t, h, t.param(weights_[l]), t.param(biases_[l]), specs_[l].stride,
                       specs_[l].pad);
            if (l + 1 < weights_.size()) h = t.relu(h);
        }
        return h;
    }

    std::size_t layer_count() const { return weights_.size(); }
    Parameter& weight(std::size_t l) { return weights_[l]; }
    Parameter& bias(std::size_t l) { return biases_[l]; }
    const Parameter& weight(std::size_t l) const { return weights_[l]; }
    const Parameter& bias(std::size_t l) const { return biases_[l]; }
    const ConvSpec& spec(std::size_t l) const { return specs_[l]; }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        for (auto& w : weights_) ps.push_back(&w);
        for (auto& b : biases_) ps.push_back(&b);
        return ps;
    }

private:
    std::vector<ConvSpec> specs_;
    std::vector<Parameter> weights_;
    std::vector<Parameter> biases_;
};

} // namespace g4ds::nets
