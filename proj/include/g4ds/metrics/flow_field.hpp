#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace g4ds::metrics {

/// Dense pixel correspondences for an ordered view pair, living on the
/// source view's grid: pixel (x,y) in the source maps to
/// (x + dx, y + dy) in the target. The mask marks pixels whose target is
/// off-frame or occluded.
struct FlowField {
    int width = 0, height = 0;
    std::vector<double> dx, dy;
    std::vector<std::uint8_t> mask;

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h), dx(static_cast<std::size_t>(w) * h, 0.0),
          dy(static_cast<std::size_t>(w) * h, 0.0), mask(static_cast<std::size_t>(w) * h, 1) {}

    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

    double valid_fraction() const {
        if (mask.empty()) return 0.0;
        std::size_t n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(mask.size());
    }
};

} // namespace g4ds::metrics
