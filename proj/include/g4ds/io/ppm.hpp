#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "g4ds/core/tensor.hpp"

namespace g4ds::io {

/// Writes an {H,W,3} image in [0,1] as binary PPM (P6, maxval 255).
/// Values clamp to [0,1] and quantize by round(v * 255).
inline void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(2) != 3)
        throw std::invalid_argument("write_ppm: expected {H,W,3} image");
    const std::size_t h = image.dim(0), w = image.dim(1);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_ppm: cannot open " + path);
    f << "P6\n" << w << " " << h << "\n255\n";
    std::string buf;
    buf.reserve(w * h * 3);
    for (std::size_t i = 0; i < w * h * 3; ++i) {
        double v = image[i];
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        buf.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write_ppm: short write to " + path);
}

namespace detail {

inline int ppm_token(std::istream& in) {
    // Skips whitespace and '#' comments, reads one non-negative integer.
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = in.get();
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (c >= '0' && c <= '9') {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("ppm: malformed header");
    return value;
}

} // namespace detail

/// Reads a P6 (binary) or P3 (ASCII) PPM into an {H,W,3} tensor in [0,1].
/// A maxval other than 255 is accepted with a warning and rescaled.
inline Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("read_ppm: cannot open " + path);
    char magic[2] = {0, 0};
    f.read(magic, 2);
    if (magic[0] != 'P' || (magic[1] != '6' && magic[1] != '3'))
        throw std::runtime_error("read_ppm: not a P6/P3 file: " + path);
    const bool binary = magic[1] == '6';
    const int w = detail::ppm_token(f);
    const int h = detail::ppm_token(f);
    const int maxval = detail::ppm_token(f);
    if (maxval <= 0 || maxval > 65535) throw std::runtime_error("read_ppm: bad maxval");
    if (maxval != 255)
        std::cerr << "read_ppm: maxval " << maxval << " != 255 in " << path << ", rescaling\n";

    Tensor img({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3});
    const std::size_t n = static_cast<std::size_t>(w) * h * 3;
    const double scale = 1.0 / maxval;
    if (binary) {
        if (maxval > 255) throw std::runtime_error("read_ppm: 16-bit P6 not supported");
        std::string buf(n, '\0');
        f.read(buf.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(f.gcount()) != n) {
            std::ostringstream msg;
            msg << "read_ppm: truncated " << path << ": expected " << n << " pixel bytes, got "
                << f.gcount();
            throw std::runtime_error(msg.str());
        }
        for (std::size_t i = 0; i < n; ++i)
            img[i] = static_cast<unsigned char>(buf[i]) * scale;
    } else {
        for (std::size_t i = 0; i < n; ++i) img[i] = detail::ppm_token(f) * scale;
    }
    return img;
}

} // namespace g4ds::io
