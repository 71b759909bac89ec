#pragma once

#include <cmath>
#include <stdexcept>

#include "g4ds/core/tape.hpp"
#include "g4ds/wct/eigh.hpp"

namespace g4ds::nets {

/// Channel whitening of a {C,H,W} image: subtract the per-channel mean over
/// pixels, then decorrelate with the inverse square root of the CxC channel
/// covariance (eigendecomposition with the shared eigenvalue floor as the
/// regularizer). Full-rank input comes out with identity channel covariance.
inline Tensor whiten_chw(const Tensor& x) {
    const std::size_t C = x.dim(0), HW = x.dim(1) * x.dim(2);
    if (HW < 4) throw std::invalid_argument("whiten: need at least 4 pixels");

    Tensor mu({C});
    for (std::size_t c = 0; c < C; ++c) {
        const double* p = x.data() + c * HW;
        double s = 0.0;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
        mu[c] = s / static_cast<double>(HW);
    }
    Tensor cov({C, C});
    for (std::size_t a = 0; a < C; ++a)
        for (std::size_t b = a; b < C; ++b) {
            const double* pa = x.data() + a * HW;
            const double* pb = x.data() + b * HW;
            double s = 0.0;
            for (std::size_t i = 0; i < HW; ++i) s += (pa[i] - mu[a]) * (pb[i] - mu[b]);
            cov.at(a, b) = cov.at(b, a) = s / static_cast<double>(HW);
        }
    const Tensor A = wct::eigh(cov).inv_sqrt();

    Tensor out(x.shape());
    for (std::size_t r = 0; r < C; ++r) {
        double* o = out.data() + r * HW;
        for (std::size_t c = 0; c < C; ++c) {
            const double a = A.at(r, c);
            if (a == 0.0) continue;
            const double* p = x.data() + c * HW;
            const double m = mu[c];
            for (std::size_t i = 0; i < HW; ++i) o[i] += a * (p[i] - m);
        }
    }
    return out;
}

/// Tape version of whiten_chw. The backward pass routes through the
/// eigendecomposition with the Daleckii-Krein adjoint of the matrix
/// inverse-square-root.
inline Var whiten(Tape& t, Var x) {
    const Tensor& tx = t.value(x);
    const std::size_t C = tx.dim(0), HW = tx.dim(1) * tx.dim(2);
    if (HW < 4) throw std::invalid_argument("whiten: need at least 4 pixels");

    Tensor mu({C});
    for (std::size_t c = 0; c < C; ++c) {
        const double* p = tx.data() + c * HW;
        double s = 0.0;
        for (std::size_t i = 0; i < HW; ++i) s += p[i];
        mu[c] = s / static_cast<double>(HW);
    }
    Tensor cov({C, C});
    for (std::size_t a = 0; a < C; ++a)
        for (std::size_t b = a; b < C; ++b) {
            const double* pa = tx.data() + a * HW;
            const double* pb = tx.data() + b * HW;
            double s = 0.0;
            for (std::size_t i = 0; i < HW; ++i) s += (pa[i] - mu[a]) * (pb[i] - mu[b]);
            cov.at(a, b) = cov.at(b, a) = s / static_cast<double>(HW);
        }
    wct::EigenDecomposition dec = wct::eigh(cov);
    const Tensor A = dec.inv_sqrt();

    Tensor out(tx.shape());
    for (std::size_t r = 0; r < C; ++r) {
        double* o = out.data() + r * HW;
        for (std::size_t c = 0; c < C; ++c) {
            const double a = A.at(r, c);
            if (a == 0.0) continue;
            const double* p = tx.data() + c * HW;
            const double m = mu[c];
            for (std::size_t i = 0; i < HW; ++i) o[i] += a * (p[i] - m);
        }
    }

    return t.custom(std::move(out), {x.id}, [C, HW, mu, A, dec](Tape& tp, int id) {
        const auto& n = tp.node(id);
        const Tensor& g = n.grad;
        const Tensor& vx = tp.node(n.parents[0]).value;
        Tensor& gx = tp.grad_mut(n.parents[0]);

        // dL/dA = sum_p g_p xc_p^T  (C x C)
        Tensor dA({C, C});
        for (std::size_t r = 0; r < C; ++r)
            for (std::size_t c = 0; c < C; ++c) {
                const double* gp = g.data() + r * HW;
                const double* xp = vx.data() + c * HW;
                double s = 0.0;
                for (std::size_t i = 0; i < HW; ++i) s += gp[i] * (xp[i] - mu[c]);
                dA.at(r, c) = s;
            }

        // Daleckii-Krein adjoint of A = cov^{-1/2}: dCov = W (P o (W^T sym(dA) W)) W^T
        const Tensor& W = dec.eigenvectors;
        const std::size_t Cn = C;
        Tensor sym({Cn, Cn});
        for (std::size_t i = 0; i < Cn; ++i)
            for (std::size_t j = 0; j < Cn; ++j) sym.at(i, j) = 0.5 * (dA.at(i, j) + dA.at(j, i));
        Tensor M({Cn, Cn}); // W^T sym W
        {
            Tensor tmp({Cn, Cn});
            mm(W, true, sym, false, tmp, false);
            mm(tmp, false, W, false, M, false);
        }
        auto gfun = [](double l) { return 1.0 / std::sqrt(l); };
        auto gprime = [](double l) { return -0.5 / (l * std::sqrt(l)); };
        for (std::size_t i = 0; i < Cn; ++i)
            for (std::size_t j = 0; j < Cn; ++j) {
                const double li = dec.eigenvalues[i], lj = dec.eigenvalues[j];
                const double p = (std::abs(li - lj) > 1e-9 * std::max(li, lj))
                                     ? (gfun(li) - gfun(lj)) / (li - lj)
                                     : gprime(0.5 * (li + lj));
                M.at(i, j) *= p;
            }
        Tensor dCov({Cn, Cn});
        {
            Tensor tmp({Cn, Cn});
            mm(W, false, M, false, tmp, false);
            mm(tmp, false, W, true, dCov, false);
        }

        // dXc_p = A g_p + (2/N) dCov xc_p ; then subtract the pixel mean of
        // dXc (adjoint of centering).
        Tensor dxc({C, HW});
        const double invN = 1.0 / static_cast<double>(HW);
        for (std::size_t r = 0; r < C; ++r) {
            double* drow = dxc.data() + r * HW;
            for (std::size_t c = 0; c < C; ++c) {
                const double arc = A.at(c, r); // A^T; A symmetric but keep exact adjoint
                const double dcv = 2.0 * invN * dCov.at(r, c);
                const double* gp = g.data() + c * HW;
                const double* xp = vx.data() + c * HW;
                const double m = mu[c];
                for (std::size_t i = 0; i < HW; ++i) drow[i] += arc * gp[i] + dcv * (xp[i] - m);
            }
        }
        for (std::size_t r = 0; r < C; ++r) {
            double* drow = dxc.data() + r * HW;
            double s = 0.0;
            for (std::size_t i = 0; i < HW; ++i) s += drow[i];
            const double mean = s * invN;
            double* gxr = gx.data() + r * HW;
            for (std::size_t i = 0; i < HW; ++i) gxr[i] += drow[i] - mean;
        }
    });
}

} // namespace g4ds::nets
