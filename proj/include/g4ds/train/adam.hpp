#pragma once

#include <cmath>
#include <vector>

#include "g4ds/core/tape.hpp"

namespace g4ds::train {

/// Adam with per-group learning rates and optional exponential decay from
/// lr to lr_final over the configured horizon. Updates are a pure function
/// of (parameters, gradients, moment state, step).
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    void add_group(const std::vector<Parameter*>& params, double lr, double lr_final = 0.0) {
        Group g;
        g.lr = lr;
        g.lr_final = lr_final > 0.0 ? lr_final : lr;
        for (Parameter* p : params) {
            Slot s;
            s.param = p;
            s.m = Tensor::zeros(p->value.shape());
            s.v = Tensor::zeros(p->value.shape());
            g.slots.push_back(std::move(s));
        }
        groups_.push_back(std::move(g));
    }

    /// Horizon for the exponential decay schedule.
    void set_total_steps(int n) { total_steps_ = n > 0 ? n : 1; }

    int step_count() const { return step_; }

    double group_lr(std::size_t gi) const {
        const Group& g = groups_[gi];
        const double frac = std::min(1.0, static_cast<double>(step_) / total_steps_);
        return g.lr * std::pow(g.lr_final / g.lr, frac);
    }

    void step() {
        ++step_;
        const double bc1 = 1.0 - std::pow(kBeta1, step_);
        const double bc2 = 1.0 - std::pow(kBeta2, step_);
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const double lr = group_lr(gi);
            for (Slot& s : groups_[gi].slots) {
                Tensor& p = s.param->value;
                const Tensor& g = s.param->grad;
                for (std::size_t i = 0; i < p.numel(); ++i) {
                    s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g[i];
                    s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g[i] * g[i];
                    const double mhat = s.m[i] / bc1;
                    const double vhat = s.v[i] / bc2;
                    p[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
                }
            }
        }
    }

    void zero_grad() {
        for (auto& g : groups_)
            for (auto& s : g.slots) s.param->zero_grad();
    }

private:
    struct Slot {
        Parameter* param = nullptr;
        Tensor m, v;
    };
    struct Group {
        double lr = 0, lr_final = 0;
        std::vector<Slot> slots;
    };
    std::vector<Group> groups_;
    int step_ = 0;
    int total_steps_ = 1;
};

} // namespace g4ds::train
