#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "g4ds/core/tensor.hpp"

namespace g4ds::wct {

/// Symmetric eigendecomposition result: M = W diag(eigenvalues) W^T with
/// orthonormal W (columns are eigenvectors). Eigenvalues are sorted
/// descending and floored at `kEigenvalueFloor`; each eigenvector's first
/// nonzero component is made positive so the decomposition is unique.
struct EigenDecomposition {
    Tensor eigenvectors; // {n,n}, column j = eigenvector j
    Tensor eigenvalues;  // {n}

    std::size_t size() const { return eigenvalues.numel(); }

    /// W f(diag) W^T for a scalar function applied to the eigenvalues.
    Tensor apply(double (*f)(double)) const {
        const std::size_t n = size();
        Tensor out({n, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    s += eigenvectors.at(i, k) * f(eigenvalues[k]) * eigenvectors.at(j, k);
                out.at(i, j) = s;
            }
        return out;
    }

    Tensor reconstruct() const {
        return apply(+[](double l) { return l; });
    }
    Tensor inv_sqrt() const {
        return apply(+[](double l) { return 1.0 / std::sqrt(l); });
    }
    Tensor sqrt() const {
        return apply(+[](double l) { return std::sqrt(l); });
    }
};

inline constexpr double kEigenvalueFloor = 1e-5;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. The input is
/// symmetrized first; rotations run until the off-diagonal Frobenius norm
/// drops below 1e-12 (relative to the matrix scale). Throws after 100 sweeps
/// without convergence, which signals a malformed (e.g. non-finite) input.
inline EigenDecomposition eigh(const Tensor& m_in) {
    const std::size_t n = m_in.dim(0);
    if (m_in.rank() != 2 || m_in.dim(1) != n) throw std::invalid_argument("eigh: square matrix required");
    if (!m_in.all_finite()) throw std::runtime_error("eigh: non-finite input");

    Tensor a({n, n});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a.at(i, j) = 0.5 * (m_in.at(i, j) + m_in.at(j, i));

    Tensor v({n, n});
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(a[i]));
    // 1e-12 gate; widened only when the matrix scale puts that below what
    // double precision can reach.
    const double tol = std::max(1e-12, 1e-15 * scale * static_cast<double>(n));

    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) s += a.at(i, j) * a.at(i, j);
        return std::sqrt(2.0 * s);
    };

    int sweep = 0;
    while (off_norm() > tol) {
        if (++sweep > 100) throw std::runtime_error("eigh: no convergence after 100 sweeps");
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::abs(apq) <= 1e-300) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double sign = theta >= 0.0 ? 1.0 : -1.0;
                const double t = sign / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p);
                    const double akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k);
                    const double aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p);
                    const double vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a.at(x, x) > a.at(y, y); });

    EigenDecomposition dec;
    dec.eigenvalues = Tensor({n});
    dec.eigenvectors = Tensor({n, n});
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        dec.eigenvalues[j] = std::max(a.at(src, src), kEigenvalueFloor);
        double flip = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = v.at(i, src);
            if (x != 0.0) {
                flip = x > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < n; ++i) dec.eigenvectors.at(i, j) = flip * v.at(i, src);
    }
    return dec;
}

} // namespace g4ds::wct
