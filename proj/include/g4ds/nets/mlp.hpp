#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "g4ds/core/rng.hpp"
#include "g4ds/core/tape.hpp"

namespace g4ds::nets {

/// Dense stack with ReLU between layers, operating on {N,in} row batches.
/// Weights are {out,in}; y = x W^T + b. Optional residual connection adds the
/// input to the output (shapes must match); with the final layer
/// zero-initialized this makes the network the identity at start.
class Mlp {
public:
    Mlp() = default;

    /// `dims` = {in, hidden..., out}. Hidden layers get He-scaled weights and
    /// zero biases; the final layer is zero-initialized when `zero_last`.
    Mlp(const std::string& name, std::vector<std::size_t> dims, Rng& rng, bool zero_last,
        bool residual = false)
        : residual_(residual) {
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            const std::size_t fan_in = dims[l], fan_out = dims[l + 1];
            const bool last = l + 2 == dims.size();
            Tensor w = (last && zero_last)
                           ? Tensor::zeros({fan_out, fan_in})
                           : Tensor::randn({fan_out, fan_in}, rng,
                                           std::sqrt(2.0 / static_cast<double>(fan_in)));
            weights_.emplace_back(name + ".w" + std::to_string(l), std::move(w));
            biases_.emplace_back(name + ".b" + std::to_string(l), Tensor::zeros({fan_out}));
        }
    }

    Var forward(Tape& t, Var x) {
        Var h = x;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            h = t.add_rowvec(t.matmul_nt(h, t.param(weights_[l])), t.param(biases_[l]));
            if (l + 1 < weights_.size()) h = t.relu(h);
        }
        if (residual_) h = t.add(h, x);
        return h;
    }

    std::size_t layer_count() const { return weights_.size(); }
    Parameter& weight(std::size_t l) { return weights_[l]; }
    Parameter& bias(std::size_t l) { return biases_[l]; }
    const Parameter& weight(std::size_t l) const { return weights_[l]; }
    const Parameter& bias(std::size_t l) const { return biases_[l]; }

    std::vector<Parameter*> parameters() {
        std::vector<Parameter*> ps;
        for (auto& w : weights_) ps.push_back(&w);
        for (auto& b : biases_) ps.push_back(&b);
        return ps;
    }

private:
    std::vector<Parameter> weights_;
    std::vector<Parameter> biases_;
    bool residual_ = false;
};

} // namespace g4ds::nets
