#pragma once

#include <cmath>
#include <stdexcept>

#include "g4ds/core/tensor.hpp"
#include "g4ds/metrics/flow_field.hpp"

namespace g4ds::metrics {

struct Warped {
    Tensor image;                    // {H,W,C}
    std::vector<std::uint8_t> mask;  // valid where flow valid and sample in-frame
};

/// Backward bilinear warping: out(p) = image(p + flow(p)). The flow lives on
/// the source view's grid and `image` is the target view, so the result is
/// the target pulled into the source frame. Pixels with invalid flow or
/// samples outside the frame are masked out.
inline Warped warp(const Tensor& image, const FlowField& flow) {
    const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
    if (static_cast<int>(W) != flow.width || static_cast<int>(H) != flow.height)
        throw std::invalid_argument("warp: flow/image size mismatch");
    Warped out;
    out.image = Tensor({H, W, C});
    out.mask.assign(W * H, 0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t i = flow.index(static_cast<int>(x), static_cast<int>(y));
            if (!flow.mask[i]) continue;
            const double sx = x + 0.5 + flow.dx[i] - 0.5;
            const double sy = y + 0.5 + flow.dy[i] - 0.5;
            if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(W - 1) ||
                sy > static_cast<double>(H - 1))
                continue;
            const std::size_t x0 = static_cast<std::size_t>(sx);
            const std::size_t y0 = static_cast<std::size_t>(sy);
            const std::size_t x1 = std::min(x0 + 1, W - 1);
            const std::size_t y1 = std::min(y0 + 1, H - 1);
            const double fx = sx - static_cast<double>(x0);
            const double fy = sy - static_cast<double>(y0);
            for (std::size_t c = 0; c < C; ++c) {
                const double v = (1 - fy) * ((1 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c)) +
                                 fy * ((1 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c));
                out.image.at(y, x, c) = v;
            }
            out.mask[i] = 1;
        }
    return out;
}

/// Root-mean-square error between view A and view B warped into A's frame,
/// over valid pixels. Errors out when nothing is valid.
inline double consistency_rmse(const Tensor& stylized_a, const Tensor& stylized_b,
                               const FlowField& flow_ab) {
    const Warped wb = warp(stylized_b, flow_ab);
    const std::size_t H = stylized_a.dim(0), W = stylized_a.dim(1), C = stylized_a.dim(2);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            const std::size_t i = y * W + x;
            if (!wb.mask[i]) continue;
            for (std::size_t c = 0; c < C; ++c) {
                const double d = stylized_a.at(y, x, c) - wb.image.at(y, x, c);
                acc += d * d;
            }
            ++count;
        }
    if (count == 0) throw std::runtime_error("consistency_rmse: no valid pixels after masking");
    return std::sqrt(acc / static_cast<double>(count * C));
}

} // namespace g4ds::metrics
