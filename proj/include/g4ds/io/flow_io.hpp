#pragma once

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "g4ds/metrics/flow_field.hpp"

namespace g4ds::io {

// Flow file layout (little-endian): magic "G4DF", u32 version, u32 width,
// u32 height, then per pixel row-major {f32 dx, f32 dy, u8 mask}.

inline constexpr std::uint32_t kFlowVersion = 1;

inline void write_flow(const std::string& path, const metrics::FlowField& flow) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_flow: cannot open " + path);
    f.write("G4DF", 4);
    auto put32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
    put32(kFlowVersion);
    put32(static_cast<std::uint32_t>(flow.width));
    put32(static_cast<std::uint32_t>(flow.height));
    for (std::size_t i = 0; i < flow.dx.size(); ++i) {
        const float dx = static_cast<float>(flow.dx[i]);
        const float dy = static_cast<float>(flow.dy[i]);
        f.write(reinterpret_cast<const char*>(&dx), 4);
        f.write(reinterpret_cast<const char*>(&dy), 4);
        f.write(reinterpret_cast<const char*>(&flow.mask[i]), 1);
    }
    if (!f) throw std::runtime_error("write_flow: short write to " + path);
}

inline metrics::FlowField read_flow(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_flow: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string b = ss.str();
    if (b.size() < 16 || b.compare(0, 4, "G4DF") != 0)
        throw std::runtime_error("read_flow: bad magic (not a G4DF file): " + path);
    auto get32 = [&b](std::size_t off) {
        std::uint32_t v;
        std::memcpy(&v, b.data() + off, 4);
        return v;
    };
    const std::uint32_t version = get32(4);
    if (version != kFlowVersion)
        throw std::runtime_error("read_flow: unsupported version " + std::to_string(version));
    const int w = static_cast<int>(get32(8));
    const int h = static_cast<int>(get32(12));
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const std::size_t expected = 16 + n * 9;
    if (b.size() != expected) {
        std::ostringstream msg;
        msg << "read_flow: size mismatch in " << path << ": expected " << expected << " bytes, got "
            << b.size();
        throw std::runtime_error(msg.str());
    }
    metrics::FlowField flow(w, h);
    std::size_t off = 16;
    for (std::size_t i = 0; i < n; ++i) {
        float dx, dy;
        std::memcpy(&dx, b.data() + off, 4);
        std::memcpy(&dy, b.data() + off + 4, 4);
        flow.dx[i] = dx;
        flow.dy[i] = dy;
        flow.mask[i] = static_cast<std::uint8_t>(b[off + 8]);
        off += 9;
    }
    return flow;
}

} // namespace g4ds::io
