#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "g4ds/core/tensor.hpp"

namespace g4ds::io {

// Checkpoint container: magic "G4DS", u32 version, u64 tensor count, then per
// tensor {u16 name length, name bytes, u8 dtype (0=f32,1=f64), u8 rank,
// u64 dims..., little-endian payload}, and a trailing CRC32 over everything
// before it. All fields little-endian.

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t seed = 0) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = ~seed;
    for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return ~crc;
}

template <typename T>
void put(std::string& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(reinterpret_cast<char*>(b), sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& off, const char* field) {
    if (off + sizeof(T) > in.size()) {
        std::ostringstream msg;
        msg << "checkpoint: truncated at byte " << off << " reading " << field << " (file size "
            << in.size() << ")";
        throw std::runtime_error(msg.str());
    }
    T v;
    std::memcpy(&v, in.data() + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace detail

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

/// Named tensors in insertion order; doubles round-trip bit-exactly via the
/// F64 dtype (the default).
class Checkpoint {
public:
    void put(const std::string& name, const Tensor& t, Dtype dtype = Dtype::F64) {
        if (index_.count(name)) throw std::invalid_argument("checkpoint: duplicate tensor " + name);
        index_[name] = entries_.size();
        entries_.push_back({name, dtype, t});
    }

    void put_scalar(const std::string& name, double v) { put(name, Tensor::scalar(v)); }

    bool has(const std::string& name) const { return index_.count(name) > 0; }

    const Tensor& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("checkpoint: missing tensor " + name);
        return entries_[it->second].data;
    }

    double get_scalar(const std::string& name) const { return get(name).item(); }

    std::size_t size() const { return entries_.size(); }
    const std::string& name_at(std::size_t i) const { return entries_[i].name; }
    const Tensor& tensor_at(std::size_t i) const { return entries_[i].data; }

    std::string serialize() const {
        std::string out;
        out.append("G4DS", 4);
        detail::put<std::uint32_t>(out, kCheckpointVersion);
        detail::put<std::uint64_t>(out, entries_.size());
        for (const auto& e : entries_) {
            if (e.name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: name too long");
            detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
            out.append(e.name);
            detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
            detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.data.rank()));
            for (std::size_t d : e.data.shape()) detail::put<std::uint64_t>(out, d);
            if (e.dtype == Dtype::F64) {
                for (std::size_t i = 0; i < e.data.numel(); ++i) detail::put<double>(out, e.data[i]);
            } else {
                for (std::size_t i = 0; i < e.data.numel(); ++i)
                    detail::put<float>(out, static_cast<float>(e.data[i]));
            }
        }
        detail::put<std::uint32_t>(
            out, detail::crc32(reinterpret_cast<const unsigned char*>(out.data()), out.size()));
        return out;
    }

    static Checkpoint deserialize(const std::string& bytes) {
        std::size_t off = 0;
        if (bytes.size() < 4 || bytes.compare(0, 4, "G4DS") != 0)
            throw std::runtime_error("checkpoint: bad magic (not a G4DS file)");
        off = 4;
        const auto version = detail::get<std::uint32_t>(bytes, off, "version");
        if (version != kCheckpointVersion)
            throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

        Checkpoint ck;
        const auto count = detail::get<std::uint64_t>(bytes, off, "tensor count");
        for (std::uint64_t i = 0; i < count; ++i) {
            const auto name_len = detail::get<std::uint16_t>(bytes, off, "name length");
            if (off + name_len > bytes.size())
                throw std::runtime_error("checkpoint: truncated tensor name");
            std::string name(bytes, off, name_len);
            off += name_len;
            const auto dtype = static_cast<Dtype>(detail::get<std::uint8_t>(bytes, off, "dtype"));
            if (dtype != Dtype::F32 && dtype != Dtype::F64)
                throw std::runtime_error("checkpoint: unknown dtype tag in " + name);
            const auto rank = detail::get<std::uint8_t>(bytes, off, "rank");
            std::vector<std::size_t> shape;
            std::size_t numel = 1;
            for (std::uint8_t d = 0; d < rank; ++d) {
                shape.push_back(static_cast<std::size_t>(
                    detail::get<std::uint64_t>(bytes, off, "dimension")));
                numel *= shape.back();
            }
            if (rank == 0) numel = 0;
            Tensor t(shape);
            if (dtype == Dtype::F64) {
                for (std::size_t k = 0; k < numel; ++k) t[k] = detail::get<double>(bytes, off, name.c_str());
            } else {
                for (std::size_t k = 0; k < numel; ++k)
                    t[k] = static_cast<double>(detail::get<float>(bytes, off, name.c_str()));
            }
            ck.put(name, t, dtype);
        }
        // Structural parse succeeded; now the trailing checksum.
        if (off + 4 != bytes.size()) {
            std::ostringstream msg;
            msg << "checkpoint: size mismatch: expected " << off + 4 << " bytes, got "
                << bytes.size();
            throw std::runtime_error(msg.str());
        }
        const std::uint32_t stored_crc = detail::get<std::uint32_t>(bytes, off, "crc32");
        const std::uint32_t actual_crc = detail::crc32(
            reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size() - 4);
        if (stored_crc != actual_crc) {
            std::ostringstream msg;
            msg << "checkpoint: CRC mismatch (stored " << stored_crc << ", computed " << actual_crc
                << ")";
            throw std::runtime_error(msg.str());
        }
        return ck;
    }

    void save(const std::string& path) const {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
        const std::string bytes = serialize();
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw std::runtime_error("checkpoint: short write to " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
        std::ostringstream ss;
        ss << f.rdbuf();
        return deserialize(ss.str());
    }

private:
    struct Entry {
        std::string name;
        Dtype dtype;
        Tensor data;
    };
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

} // namespace g4ds::io
