#pragma once

#include <cassert>
#include <cstddef>

#include "g4ds/core/tape.hpp"

namespace g4ds {

// Raw conv kernels on {C,H,W} tensors, weights {Cout,Cin,k,k}. Zero padding.

inline void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad,
                           Tensor& out) {
    const int Cin = static_cast<int>(x.dim(0));
    const int H = static_cast<int>(x.dim(1));
    const int W = static_cast<int>(x.dim(2));
    const int Cout = static_cast<int>(w.dim(0));
    const int K = static_cast<int>(w.dim(2));
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - K) / stride + 1;
    assert(static_cast<int>(out.dim(0)) == Cout && static_cast<int>(out.dim(1)) == Ho &&
           static_cast<int>(out.dim(2)) == Wo);
    double* po = out.data();
    for (int oc = 0; oc < Cout; ++oc) {
        const double bias = b.numel() ? b[oc] : 0.0;
        double* oplane = po + static_cast<std::size_t>(oc) * Ho * Wo;
        for (int i = 0; i < Ho * Wo; ++i) oplane[i] = bias;
    }
    for (int oc = 0; oc < Cout; ++oc) {
        double* oplane = po + static_cast<std::size_t>(oc) * Ho * Wo;
        for (int ic = 0; ic < Cin; ++ic) {
            const double* xplane = x.data() + static_cast<std::size_t>(ic) * H * W;
            const double* wk = w.data() + (static_cast<std::size_t>(oc) * Cin + ic) * K * K;
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = wk[ky * K + kx];
                    if (wv == 0.0) continue;
                    // Valid ox range: 0 <= ox*stride + kx - pad < W.
                    const int ox_lo = std::max(0, (pad - kx + stride - 1) / stride);
                    const int ox_hi = std::min(Wo, (W - 1 - kx + pad) / stride + 1);
                    if (ox_hi <= ox_lo) continue;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W + kx - pad;
                        double* orow = oplane + static_cast<std::size_t>(oy) * Wo;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * xrow[ox];
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox)
                                orow[ox] += wv * xrow[static_cast<std::size_t>(ox) * stride];
                        }
                    }
                }
        }
    }
}

inline void conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad, const Tensor& gout,
                            Tensor* gx, Tensor* gw, Tensor* gb) {
    const int Cin = static_cast<int>(x.dim(0));
    const int H = static_cast<int>(x.dim(1));
    const int W = static_cast<int>(x.dim(2));
    const int Cout = static_cast<int>(w.dim(0));
    const int K = static_cast<int>(w.dim(2));
    const int Ho = static_cast<int>(gout.dim(1));
    const int Wo = static_cast<int>(gout.dim(2));
    if (gb) {
        for (int oc = 0; oc < Cout; ++oc) {
            const double* gplane = gout.data() + static_cast<std::size_t>(oc) * Ho * Wo;
            double acc = 0.0;
            for (int i = 0; i < Ho * Wo; ++i) acc += gplane[i];
            (*gb)[oc] += acc;
        }
    }
    for (int oc = 0; oc < Cout; ++oc) {
        const double* gplane = gout.data() + static_cast<std::size_t>(oc) * Ho * Wo;
        for (int ic = 0; ic < Cin; ++ic) {
            const double* xplane = x.data() + static_cast<std::size_t>(ic) * H * W;
            double* gxplane = gx ? gx->data() + static_cast<std::size_t>(ic) * H * W : nullptr;
            const double* wk = w.data() + (static_cast<std::size_t>(oc) * Cin + ic) * K * K;
            double* gwk = gw ? gw->data() + (static_cast<std::size_t>(oc) * Cin + ic) * K * K : nullptr;
            for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                    const double wv = wk[ky * K + kx];
                    const int ox_lo = std::max(0, (pad - kx + stride - 1) / stride);
                    const int ox_hi = std::min(Wo, (W - 1 - kx + pad) / stride + 1);
                    if (ox_hi <= ox_lo) continue;
                    double wacc = 0.0;
                    for (int oy = 0; oy < Ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= H) continue;
                        const double* xrow = xplane + static_cast<std::size_t>(iy) * W + kx - pad;
                        double* gxrow =
                            gxplane ? gxplane + static_cast<std::size_t>(iy) * W + kx - pad : nullptr;
                        const double* grow = gplane + static_cast<std::size_t>(oy) * Wo;
                        if (stride == 1) {
                            if (gxrow) {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                    const double g = grow[ox];
                                    wacc += g * xrow[ox];
                                    gxrow[ox] += g * wv;
                                }
                            } else {
                                for (int ox = ox_lo; ox < ox_hi; ++ox) wacc += grow[ox] * xrow[ox];
                            }
                        } else {
                            for (int ox = ox_lo; ox < ox_hi; ++ox) {
                                const std::size_t ix = static_cast<std::size_t>(ox) * stride;
                                const double g = grow[ox];
                                wacc += g * xrow[ix];
                                if (gxrow) gxrow[ix] += g * wv;
                            }
                        }
                    }
                    if (gwk) gwk[ky * K + kx] += wacc;
                }
        }
    }
}

/// Tape op: 2D convolution of a {Cin,H,W} input with {Cout,Cin,K,K} weights
/// and {Cout} bias, zero padding.
inline Var conv2d(Tape& t, Var x, Var w, Var b, int stride, int pad) {
    const Tensor& tx = t.value(x);
    const Tensor& tw = t.value(w);
    const int K = static_cast<int>(tw.dim(2));
    const int Ho = (static_cast<int>(tx.dim(1)) + 2 * pad - K) / stride + 1;
    const int Wo = (static_cast<int>(tx.dim(2)) + 2 * pad - K) / stride + 1;
    Tensor out({tw.dim(0), static_cast<std::size_t>(Ho), static_cast<std::size_t>(Wo)});
    conv2d_forward(tx, tw, t.value(b), stride, pad, out);
    return t.custom(std::move(out), {x.id, w.id, b.id}, [stride, pad](Tape& tp, int id) {
        const auto& n = tp.node(id);
        const Tensor& gout = n.grad;
        const Tensor& vx = tp.node(n.parents[0]).value;
        const Tensor& vw = tp.node(n.parents[1]).value;
        Tensor& gx = tp.grad_mut(n.parents[0]);
        Tensor& gw = tp.grad_mut(n.parents[1]);
        Tensor& gb = tp.grad_mut(n.parents[2]);
        conv2d_backward(vx, vw, stride, pad, gout, &gx, &gw, &gb);
    });
}

/// Tape op: replicate-pad a {C,H,W} tensor by `p` on each spatial border.
inline Var replicate_pad(Tape& t, Var x, int p) {
    const Tensor& tx = t.value(x);
    const int C = static_cast<int>(tx.dim(0));
    const int H = static_cast<int>(tx.dim(1));
    const int W = static_cast<int>(tx.dim(2));
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    Tensor out({static_cast<std::size_t>(C), static_cast<std::size_t>(Hp), static_cast<std::size_t>(Wp)});
    auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Hp; ++y) {
            const int sy = clampi(y - p, 0, H - 1);
            for (int xx = 0; xx < Wp; ++xx) {
                const int sx = clampi(xx - p, 0, W - 1);
                out.at(c, y, xx) = tx.at(c, sy, sx);
            }
        }
    return t.custom(std::move(out), {x.id}, [p, C, H, W, Hp, Wp](Tape& tp, int id) {
        const auto& n = tp.node(id);
        const Tensor& g = n.grad;
        Tensor& gx = tp.grad_mut(n.parents[0]);
        auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < Hp; ++y) {
                const int sy = clampi(y - p, 0, H - 1);
                for (int xx = 0; xx < Wp; ++xx) {
                    const int sx = clampi(xx - p, 0, W - 1);
                    gx.at(c, sy, sx) += g.at(c, y, xx);
                }
            }
    });
}

/// Tape op: spatial crop [y0,y0+H) x [x0,x0+W) of a {C,Hp,Wp} tensor.
inline Var slice_spatial(Tape& t, Var x, int y0, int x0, int H, int W) {
    const Tensor& tx = t.value(x);
    const int C = static_cast<int>(tx.dim(0));
    Tensor out({static_cast<std::size_t>(C), static_cast<std::size_t>(H), static_cast<std::size_t>(W)});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) out.at(c, y, xx) = tx.at(c, y0 + y, x0 + xx);
    return t.custom(std::move(out), {x.id}, [y0, x0, C, H, W](Tape& tp, int id) {
        const auto& n = tp.node(id);
        const Tensor& g = n.grad;
        Tensor& gx = tp.grad_mut(n.parents[0]);
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) gx.at(c, y0 + y, x0 + xx) += g.at(c, y, xx);
    });
}

} // namespace g4ds
