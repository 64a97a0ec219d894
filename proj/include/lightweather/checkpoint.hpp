#pragma once

// Checkpoint container:
//
//   "LWCKPT1"                                  7 bytes magic
//   u32 tensor_count
//   tensor_count x { u32 name_len, name bytes,
//                    u8 element_type (1 = f32, 2 = f64),
//                    u32 ndim, u64 dims[ndim] }   manifest
//   raw tensor data in manifest order
//
// All integers and floats are little-endian.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "lightweather/errors.hpp"
#include "lightweather/model.hpp"

namespace lightweather {

inline constexpr char kCheckpointMagic[] = "LWCKPT1";
inline constexpr std::size_t kCheckpointMagicSize = 7;

enum class ElementType : std::uint8_t { f32 = 1, f64 = 2 };

inline std::size_t element_size(ElementType t) { return t == ElementType::f32 ? 4 : 8; }

struct ManifestEntry {
    std::string name;
    ElementType type = ElementType::f64;
    std::vector<std::int64_t> shape;

    [[nodiscard]] std::uint64_t element_count() const {
        std::uint64_t n = 1;
        for (auto d : shape) n *= static_cast<std::uint64_t>(d);
        return n;
    }
};

namespace detail {

class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    template <typename UInt>
    void uint(UInt v) {
        for (std::size_t i = 0; i < sizeof(UInt); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
    [[nodiscard]] const std::vector<char>& buffer() const { return buf_; }

private:
    std::vector<char> buf_;
};

class ByteReader {
public:
    ByteReader(const std::vector<char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

    void need(std::size_t n) const {
        if (pos_ + n > buf_.size()) throw CheckpointError("truncated checkpoint '" + path_ + "'");
    }
    template <typename UInt>
    UInt uint() {
        need(sizeof(UInt));
        UInt v = 0;
        for (std::size_t i = 0; i < sizeof(UInt); ++i) {
            v |= static_cast<UInt>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(UInt);
        return v;
    }
    std::string string(std::size_t n) {
        need(n);
        std::string s(buf_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    double value(ElementType t) {
        if (t == ElementType::f32) return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>()));
        return std::bit_cast<double>(uint<std::uint64_t>());
    }
    [[nodiscard]] std::size_t remaining() const { return buf_.size() - pos_; }

private:
    const std::vector<char>& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

inline std::vector<char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<ManifestEntry> parse_manifest(ByteReader& r, const std::string& path) {
    if (r.string(kCheckpointMagicSize) != std::string(kCheckpointMagic, kCheckpointMagicSize)) {
        throw CheckpointError("'" + path + "' is not a checkpoint (bad magic)");
    }
    const auto count = r.uint<std::uint32_t>();
    std::vector<ManifestEntry> manifest;
    for (std::uint32_t i = 0; i < count; ++i) {
        ManifestEntry e;
        e.name = r.string(r.uint<std::uint32_t>());
        const auto type = r.uint<std::uint8_t>();
        if (type != 1 && type != 2) {
            throw CheckpointError("tensor '" + e.name + "' has unknown element type " + std::to_string(type));
        }
        e.type = static_cast<ElementType>(type);
        const auto ndim = r.uint<std::uint32_t>();
        for (std::uint32_t k = 0; k < ndim; ++k) e.shape.push_back(static_cast<std::int64_t>(r.uint<std::uint64_t>()));
        manifest.push_back(std::move(e));
    }
    return manifest;
}

inline std::string shape_text(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace detail

/// Serialized checkpoint bytes. f32 storage rounds each value once.
inline std::vector<char> encode_checkpoint(const ModelParams& params, ElementType type = ElementType::f64) {
    const auto views = tensors(params);
    detail::ByteWriter w;
    w.bytes(kCheckpointMagic, kCheckpointMagicSize);
    w.uint(static_cast<std::uint32_t>(views.size()));
    for (const auto& t : views) {
        w.uint(static_cast<std::uint32_t>(t.name.size()));
        w.bytes(t.name.data(), t.name.size());
        w.uint(static_cast<std::uint8_t>(type));
        w.uint(static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) w.uint(static_cast<std::uint64_t>(d));
    }
    for (const auto& t : views) {
        for (double v : t.values) {
            if (type == ElementType::f32) {
                w.f32(static_cast<float>(v));
            } else {
                w.f64(v);
            }
        }
    }
    return w.buffer();
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                            ElementType type = ElementType::f64) {
    const auto bytes = encode_checkpoint(params, type);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, path.string());
    return detail::parse_manifest(r, path.string());
}

/// Loads a checkpoint for the architecture `config`. The manifest must list
/// exactly the tensors of that architecture with matching shapes; nothing is
/// returned unless the whole file validates.
inline ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& config) {
    const std::string where = path.string();
    const auto bytes = detail::read_file_bytes(path);
    detail::ByteReader r(bytes, where);
    const auto manifest = detail::parse_manifest(r, where);

    ModelParams params = ModelParams::zeros(config);
    auto refs = tensors(params);

    std::map<std::string, const ManifestEntry*> by_name;
    for (const auto& e : manifest) by_name[e.name] = &e;

    std::vector<std::string> problems;
    for (const auto& ref : refs) {
        auto it = by_name.find(ref.name);
        if (it == by_name.end()) {
            problems.push_back(ref.name + " missing (expected " + detail::shape_text(ref.shape) + ")");
        } else if (it->second->shape != ref.shape) {
            problems.push_back(ref.name + " has shape " + detail::shape_text(it->second->shape) + ", expected " +
                               detail::shape_text(ref.shape));
        }
    }
    for (const auto& e : manifest) {
        const bool known = std::any_of(refs.begin(), refs.end(), [&](const TensorRef& t) { return t.name == e.name; });
        if (!known) problems.push_back(e.name + " is not part of this model");
    }
    if (!problems.empty()) {
        std::string msg = "checkpoint '" + where + "' does not match model config:";
        for (const auto& p : problems) msg += " " + p + ";";
        throw CheckpointError(msg);
    }

    std::uint64_t payload = 0;
    for (const auto& e : manifest) payload += e.element_count() * element_size(e.type);
    if (r.remaining() < payload) throw CheckpointError("truncated checkpoint '" + where + "'");
    if (r.remaining() > payload) throw CheckpointError("trailing bytes in checkpoint '" + where + "'");

    for (const auto& e : manifest) {
        auto it = std::find_if(refs.begin(), refs.end(), [&](const TensorRef& t) { return t.name == e.name; });
        for (auto& v : it->values) v = r.value(e.type);
    }
    return params;
}

}  // namespace lightweather
