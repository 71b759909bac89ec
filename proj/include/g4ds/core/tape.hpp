#pragma once

#include <algorithm>
#include <deque>
#include <cassert>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "g4ds/core/tensor.hpp"

namespace g4ds {

/// Trainable leaf: value plus an accumulated gradient buffer.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor::zeros(value.shape());
    }

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

/// Handle to a node on a tape.
struct Var {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

// ---------------------------------------------------------------------------
// Raw matrix kernels (used by both forward ops and backward closures).
// ---------------------------------------------------------------------------

/// out(+)= op(a) * op(b) with optional transposes. a is {M,K} (or {K,M} if ta),
/// b is {K,N} (or {N,K} if tb), out is {M,N}.
inline void mm(const Tensor& a, bool ta, const Tensor& b, bool tb, Tensor& out, bool accumulate) {
    const std::size_t M = ta ? a.dim(1) : a.dim(0);
    const std::size_t K = ta ? a.dim(0) : a.dim(1);
    const std::size_t N = tb ? b.dim(0) : b.dim(1);
    assert((tb ? b.dim(1) : b.dim(0)) == K);
    assert(out.dim(0) == M && out.dim(1) == N);
    if (!accumulate) out.fill(0.0);
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    if (!ta && !tb) {
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t k = 0; k < K; ++k) {
                const double av = pa[i * K + k];
                const double* br = pb + k * N;
                double* orow = po + i * N;
                for (std::size_t j = 0; j < N; ++j) orow[j] += av * br[j];
            }
    } else if (!ta && tb) {
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                const double* ar = pa + i * K;
                const double* br = pb + j * K;
                double acc = 0.0;
                for (std::size_t k = 0; k < K; ++k) acc += ar[k] * br[k];
                po[i * N + j] += acc;
            }
    } else if (ta && !tb) {
        for (std::size_t k = 0; k < K; ++k)
            for (std::size_t i = 0; i < M; ++i) {
                const double av = pa[k * M + i];
                const double* br = pb + k * N;
                double* orow = po + i * N;
                for (std::size_t j = 0; j < N; ++j) orow[j] += av * br[j];
            }
    } else {
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < N; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < K; ++k) acc += pa[k * M + i] * pb[j * K + k];
                po[i * N + j] += acc;
            }
    }
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

/// Reverse-mode differentiation record. Nodes are appended in evaluation
/// order (a topological order by construction); backward() walks them in
/// reverse, visiting each reachable node exactly once.
///
/// With grad_enabled == false the tape still evaluates but records no
/// backward closures (cheap forward-only mode for frozen components).
class Tape {
public:
    struct Node {
        Tensor value;
        Tensor grad; // allocated lazily during backward
        std::vector<int> parents;
        std::function<void(Tape&, int)> backward;
        Parameter* param = nullptr;
    };

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }
    std::size_t size() const { return nodes_.size(); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    Tensor& grad_mut(int id) {
        Node& n = nodes_[id];
        if (n.grad.numel() != n.value.numel()) n.grad = Tensor::zeros(n.value.shape());
        return n.grad;
    }

    Var constant(Tensor v) { return push(std::move(v), {}, nullptr); }

    /// Leaf bound to a parameter; backward accumulates into p.grad.
    Var param(Parameter& p) {
        Var v = push(p.value, {}, nullptr);
        if (grad_enabled_) {
            nodes_[v.id].param = &p;
            nodes_[v.id].backward = [](Tape& t, int id) {
                Node& n = t.nodes_[id];
                const Tensor& g = n.grad;
                for (std::size_t i = 0; i < g.numel(); ++i) n.param->grad[i] += g[i];
            };
        }
        return v;
    }

    /// Generic custom node.
    Var custom(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward) {
        return push(std::move(value), std::move(parents), grad_enabled_ ? std::move(backward) : nullptr);
    }

    // -- elementwise -------------------------------------------------------

    Var add(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        assert(ta.same_shape(tb));
        Tensor out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga[i] += g[i];
                gb[i] += g[i];
            }
        });
    }

    Var sub(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        assert(ta.same_shape(tb));
        Tensor out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga[i] += g[i];
                gb[i] -= g[i];
            }
        });
    }

    Var mul(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        assert(ta.same_shape(tb));
        Tensor out = ta;
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vb = t.nodes_[t.nodes_[id].parents[1]].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < g.numel(); ++i) {
                ga[i] += g[i] * vb[i];
                gb[i] += g[i] * va[i];
            }
        });
    }

    Var scale(Var a, double s) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
        return push(std::move(out), {a.id}, [s](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
        });
    }

    Var relu(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
        return push(std::move(out), {a.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& v = t.nodes_[id].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (v[i] > 0.0) ga[i] += g[i];
        });
    }

    Var sigmoid(Var a) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
        return push(std::move(out), {a.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& y = t.nodes_[id].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
        });
    }

    /// sqrt(x + eps), elementwise.
    Var sqrt_shift(Var a, double eps) {
        Tensor out = value(a);
        for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(out[i] + eps);
        return push(std::move(out), {a.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& y = t.nodes_[id].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * 0.5 / y[i];
        });
    }

    // -- reductions & losses -------------------------------------------------

    Var sum(Var a) {
        double s = 0.0;
        const Tensor& ta = value(a);
        for (std::size_t i = 0; i < ta.numel(); ++i) s += ta[i];
        return push(Tensor::scalar(s), {a.id}, [](Tape& t, int id) {
            const double g = t.nodes_[id].grad[0];
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
        });
    }

    Var mean(Var a) {
        const Tensor& ta = value(a);
        const double inv = 1.0 / static_cast<double>(ta.numel());
        double s = 0.0;
        for (std::size_t i = 0; i < ta.numel(); ++i) s += ta[i];
        return push(Tensor::scalar(s * inv), {a.id}, [inv](Tape& t, int id) {
            const double g = t.nodes_[id].grad[0] * inv;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
        });
    }

    /// Mean squared difference over all elements.
    Var mse(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        assert(ta.same_shape(tb));
        const double inv = 1.0 / static_cast<double>(ta.numel());
        double s = 0.0;
        for (std::size_t i = 0; i < ta.numel(); ++i) {
            const double d = ta[i] - tb[i];
            s += d * d;
        }
        return push(Tensor::scalar(s * inv), {a.id, b.id}, [inv](Tape& t, int id) {
            const double g = t.nodes_[id].grad[0] * 2.0 * inv;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vb = t.nodes_[t.nodes_[id].parents[1]].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < va.numel(); ++i) {
                const double d = g * (va[i] - vb[i]);
                ga[i] += d;
                gb[i] -= d;
            }
        });
    }

    /// Column means of a {N,C} matrix -> {C}.
    Var mean_rows(Var a) {
        const Tensor& ta = value(a);
        const std::size_t N = ta.dim(0), C = ta.dim(1);
        Tensor out({C});
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < C; ++c) out[c] += ta.at(i, c);
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t c = 0; c < C; ++c) out[c] *= inv;
        return push(std::move(out), {a.id}, [N, C, inv](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < C; ++c) ga.at(i, c) += g[c] * inv;
        });
    }

    /// Per-channel spatial mean of a {C,H,W} tensor -> {C}.
    Var channel_mean(Var a) {
        const Tensor& ta = value(a);
        const std::size_t C = ta.dim(0), HW = ta.dim(1) * ta.dim(2);
        Tensor out({C});
        const double inv = 1.0 / static_cast<double>(HW);
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            const double* p = ta.data() + c * HW;
            for (std::size_t i = 0; i < HW; ++i) s += p[i];
            out[c] = s * inv;
        }
        return push(std::move(out), {a.id}, [C, HW, inv](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t c = 0; c < C; ++c) {
                const double gc = g[c] * inv;
                double* p = ga.data() + c * HW;
                for (std::size_t i = 0; i < HW; ++i) p[i] += gc;
            }
        });
    }

    // -- broadcasting -------------------------------------------------------

    /// {N,C} + {C} row-broadcast.
    Var add_rowvec(Var a, Var v) {
        const Tensor& ta = value(a);
        const Tensor& tv = value(v);
        const std::size_t N = ta.dim(0), C = ta.dim(1);
        assert(tv.numel() == C);
        Tensor out = ta;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < C; ++c) out.at(i, c) += tv[c];
        return push(std::move(out), {a.id, v.id}, [N, C](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gv = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < C; ++c) {
                    ga.at(i, c) += g.at(i, c);
                    gv[c] += g.at(i, c);
                }
        });
    }

    Var sub_rowvec(Var a, Var v) { return add_rowvec(a, scale(v, -1.0)); }

    /// {C,H,W} * {1,H,W} per-pixel broadcast over channels.
    Var mul_spatial(Var a, Var w) {
        const Tensor& ta = value(a);
        const Tensor& tw = value(w);
        const std::size_t C = ta.dim(0), HW = ta.dim(1) * ta.dim(2);
        assert(tw.numel() == HW);
        Tensor out = ta;
        for (std::size_t c = 0; c < C; ++c) {
            double* p = out.data() + c * HW;
            for (std::size_t i = 0; i < HW; ++i) p[i] *= tw[i];
        }
        return push(std::move(out), {a.id, w.id}, [C, HW](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vw = t.nodes_[t.nodes_[id].parents[1]].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gw = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t c = 0; c < C; ++c) {
                const double* gp = g.data() + c * HW;
                const double* ap = va.data() + c * HW;
                double* gap = ga.data() + c * HW;
                for (std::size_t i = 0; i < HW; ++i) {
                    gap[i] += gp[i] * vw[i];
                    gw[i] += gp[i] * ap[i];
                }
            }
        });
    }

    /// {C,H,W} - {C} channel-broadcast.
    Var sub_cvec(Var a, Var v) {
        const Tensor& ta = value(a);
        const Tensor& tv = value(v);
        const std::size_t C = ta.dim(0), HW = ta.dim(1) * ta.dim(2);
        assert(tv.numel() == C);
        Tensor out = ta;
        for (std::size_t c = 0; c < C; ++c) {
            double* p = out.data() + c * HW;
            for (std::size_t i = 0; i < HW; ++i) p[i] -= tv[c];
        }
        return push(std::move(out), {a.id, v.id}, [C, HW](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gv = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t c = 0; c < C; ++c) {
                const double* gp = g.data() + c * HW;
                double* gap = ga.data() + c * HW;
                double acc = 0.0;
                for (std::size_t i = 0; i < HW; ++i) {
                    gap[i] += gp[i];
                    acc += gp[i];
                }
                gv[c] -= acc;
            }
        });
    }

    // -- structural ----------------------------------------------------------

    Var reshape(Var a, std::vector<std::size_t> shape) {
        Tensor out = value(a).reshaped(std::move(shape));
        return push(std::move(out), {a.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
        });
    }

    /// Columns [c0,c1) of a {N,C} matrix.
    Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
        const Tensor& ta = value(a);
        const std::size_t N = ta.dim(0), C = ta.dim(1), W = c1 - c0;
        Tensor out({N, W});
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < W; ++c) out.at(i, c) = ta.at(i, c0 + c);
        return push(std::move(out), {a.id}, [N, C, c0, W](Tape& t, int id) {
            (void)C;
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < W; ++c) ga.at(i, c0 + c) += g.at(i, c);
        });
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        const std::size_t N = ta.dim(0), Ca = ta.dim(1), Cb = tb.dim(1);
        assert(tb.dim(0) == N);
        Tensor out({N, Ca + Cb});
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t c = 0; c < Ca; ++c) out.at(i, c) = ta.at(i, c);
            for (std::size_t c = 0; c < Cb; ++c) out.at(i, Ca + c) = tb.at(i, c);
        }
        return push(std::move(out), {a.id, b.id}, [N, Ca, Cb](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < N; ++i) {
                for (std::size_t c = 0; c < Ca; ++c) ga.at(i, c) += g.at(i, c);
                for (std::size_t c = 0; c < Cb; ++c) gb.at(i, c) += g.at(i, Ca + c);
            }
        });
    }

    /// Channels [c0,c1) of a {C,H,W} tensor.
    Var slice_channels(Var a, std::size_t c0, std::size_t c1) {
        const Tensor& ta = value(a);
        const std::size_t HW = ta.dim(1) * ta.dim(2), W = c1 - c0;
        Tensor out({W, ta.dim(1), ta.dim(2)});
        std::copy(ta.data() + c0 * HW, ta.data() + c1 * HW, out.data());
        return push(std::move(out), {a.id}, [c0, HW, W](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            double* dst = ga.data() + c0 * HW;
            for (std::size_t i = 0; i < W * HW; ++i) dst[i] += g[i];
        });
    }

    Var concat_channels(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        assert(ta.dim(1) == tb.dim(1) && ta.dim(2) == tb.dim(2));
        const std::size_t HW = ta.dim(1) * ta.dim(2);
        const std::size_t Ca = ta.dim(0), Cb = tb.dim(0);
        Tensor out({Ca + Cb, ta.dim(1), ta.dim(2)});
        std::copy(ta.data(), ta.data() + Ca * HW, out.data());
        std::copy(tb.data(), tb.data() + Cb * HW, out.data() + Ca * HW);
        return push(std::move(out), {a.id, b.id}, [Ca, Cb, HW](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            Tensor& gb = t.grad_mut(t.nodes_[id].parents[1]);
            for (std::size_t i = 0; i < Ca * HW; ++i) ga[i] += g[i];
            for (std::size_t i = 0; i < Cb * HW; ++i) gb[i] += g[Ca * HW + i];
        });
    }

    /// {H,W,C} -> {C,H,W}.
    Var hwc_to_chw(Var a) {
        const Tensor& ta = value(a);
        const std::size_t H = ta.dim(0), W = ta.dim(1), C = ta.dim(2);
        Tensor out({C, H, W});
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x)
                for (std::size_t c = 0; c < C; ++c) out.at(c, y, x) = ta.at(y, x, c);
        return push(std::move(out), {a.id}, [H, W, C](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x)
                    for (std::size_t c = 0; c < C; ++c) ga.at(y, x, c) += g.at(c, y, x);
        });
    }

    /// {C,H,W} -> {H,W,C}.
    Var chw_to_hwc(Var a) {
        const Tensor& ta = value(a);
        const std::size_t C = ta.dim(0), H = ta.dim(1), W = ta.dim(2);
        Tensor out({H, W, C});
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) out.at(y, x, c) = ta.at(c, y, x);
        return push(std::move(out), {a.id}, [C, H, W](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t y = 0; y < H; ++y)
                    for (std::size_t x = 0; x < W; ++x) ga.at(c, y, x) += g.at(y, x, c);
        });
    }

    /// Softmax over the channel axis of a {C,H,W} tensor, per pixel.
    Var softmax_channels(Var a) {
        const Tensor& ta = value(a);
        const std::size_t C = ta.dim(0), HW = ta.dim(1) * ta.dim(2);
        Tensor out(ta.shape());
        for (std::size_t i = 0; i < HW; ++i) {
            double mx = -1e300;
            for (std::size_t c = 0; c < C; ++c) mx = std::max(mx, ta[c * HW + i]);
            double Z = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
                const double e = std::exp(ta[c * HW + i] - mx);
                out[c * HW + i] = e;
                Z += e;
            }
            const double inv = 1.0 / Z;
            for (std::size_t c = 0; c < C; ++c) out[c * HW + i] *= inv;
        }
        return push(std::move(out), {a.id}, [C, HW](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& y = t.nodes_[id].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < HW; ++i) {
                double dot = 0.0;
                for (std::size_t c = 0; c < C; ++c) dot += g[c * HW + i] * y[c * HW + i];
                for (std::size_t c = 0; c < C; ++c)
                    ga[c * HW + i] += y[c * HW + i] * (g[c * HW + i] - dot);
            }
        });
    }

    /// Row-wise L2 normalization of a {N,C} matrix.
    Var normalize_rows(Var a) {
        const Tensor& ta = value(a);
        const std::size_t N = ta.dim(0), C = ta.dim(1);
        Tensor out(ta.shape());
        for (std::size_t i = 0; i < N; ++i) {
            double n2 = 0.0;
            for (std::size_t c = 0; c < C; ++c) n2 += ta.at(i, c) * ta.at(i, c);
            const double inv = 1.0 / std::sqrt(n2);
            for (std::size_t c = 0; c < C; ++c) out.at(i, c) = ta.at(i, c) * inv;
        }
        return push(std::move(out), {a.id}, [N, C](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& y = t.nodes_[id].value;
            const Tensor& x = t.nodes_[t.nodes_[id].parents[0]].value;
            Tensor& ga = t.grad_mut(t.nodes_[id].parents[0]);
            for (std::size_t i = 0; i < N; ++i) {
                double n2 = 0.0, dot = 0.0;
                for (std::size_t c = 0; c < C; ++c) {
                    n2 += x.at(i, c) * x.at(i, c);
                    dot += g.at(i, c) * y.at(i, c);
                }
                const double inv = 1.0 / std::sqrt(n2);
                for (std::size_t c = 0; c < C; ++c)
                    ga.at(i, c) += (g.at(i, c) - y.at(i, c) * dot) * inv;
            }
        });
    }

    // -- matmul ---------------------------------------------------------------

    /// {M,K} x {K,N}.
    Var matmul(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        Tensor out({ta.dim(0), tb.dim(1)});
        mm(ta, false, tb, false, out, false);
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vb = t.nodes_[t.nodes_[id].parents[1]].value;
            mm(g, false, vb, true, t.grad_mut(t.nodes_[id].parents[0]), true);
            mm(va, true, g, false, t.grad_mut(t.nodes_[id].parents[1]), true);
        });
    }

    /// {M,K} x {N,K}^T -> {M,N}. The usual "x W^T" dense-layer product.
    Var matmul_nt(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        Tensor out({ta.dim(0), tb.dim(0)});
        mm(ta, false, tb, true, out, false);
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vb = t.nodes_[t.nodes_[id].parents[1]].value;
            mm(g, false, vb, false, t.grad_mut(t.nodes_[id].parents[0]), true);
            mm(g, true, va, false, t.grad_mut(t.nodes_[id].parents[1]), true);
        });
    }

    /// {K,M}^T x {K,N} -> {M,N}. Used for Gram/covariance products.
    Var matmul_tn(Var a, Var b) {
        const Tensor& ta = value(a);
        const Tensor& tb = value(b);
        Tensor out({ta.dim(1), tb.dim(1)});
        mm(ta, true, tb, false, out, false);
        return push(std::move(out), {a.id, b.id}, [](Tape& t, int id) {
            const Tensor& g = t.nodes_[id].grad;
            const Tensor& va = t.nodes_[t.nodes_[id].parents[0]].value;
            const Tensor& vb = t.nodes_[t.nodes_[id].parents[1]].value;
            mm(vb, false, g, true, t.grad_mut(t.nodes_[id].parents[0]), true);
            mm(va, false, g, false, t.grad_mut(t.nodes_[id].parents[1]), true);
        });
    }

    // -- backward -------------------------------------------------------------

    /// Reverse sweep from a scalar loss. Visits each node upstream of the
    /// loss exactly once, in reverse construction (= reverse topological)
    /// order. Unreachable nodes keep zero gradients.
    void backward(Var loss) {
        if (!grad_enabled_) throw std::logic_error("backward on a grad-disabled tape");
        assert(value(loss).numel() == 1);
        std::vector<bool> reachable(nodes_.size(), false);
        std::vector<int> stack{loss.id};
        reachable[loss.id] = true;
        while (!stack.empty()) {
            const int id = stack.back();
            stack.pop_back();
            for (int p : nodes_[id].parents)
                if (!reachable[p]) {
                    reachable[p] = true;
                    stack.push_back(p);
                }
        }
        grad_mut(loss.id)[0] = 1.0;
        for (int id = loss.id; id >= 0; --id) {
            if (!reachable[id] || !nodes_[id].backward) continue;
            if (nodes_[id].grad.numel() == 0) continue;
            nodes_[id].backward(*this, id);
        }
    }

    const Node& node(int id) const { return nodes_[id]; }

private:
    Var push(Tensor value, std::vector<int> parents, std::function<void(Tape&, int)> backward) {
        Node n;
        n.value = std::move(value);
        n.parents = std::move(parents);
        if (grad_enabled_) n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<int>(nodes_.size()) - 1};
    }

    // deque: references returned by value()/grad_mut() stay valid while new
    // nodes are appended mid-expression.
    std::deque<Node> nodes_;
    bool grad_enabled_;
};

} // namespace g4ds
