#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pcreg/encoder.hpp"

namespace pcreg {

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * One named parameter block. shapes describe an MLP layout (empty for raw
 * vectors such as optimizer moments or scalar state); seed records the
 * initialization stream when there is one.
 */
struct CheckpointSection {
    std::string name;
    std::vector<LayerShape> shapes;
    std::uint64_t seed = 0;
    Eigen::VectorXd values;
};

/**
 * Container of named float64 sections with a fixed little-endian layout:
 *
 *   bytes 0-7   magic "PCREGCK1"
 *   u32         section count
 *   per section:
 *     u32       name length, then that many name bytes
 *     u64       seed
 *     u32       layer count, then per layer i32 in, i32 out
 *     u64       value count, then that many IEEE-754 doubles
 *
 * All integers and doubles are little-endian. Writing the same checkpoint
 * twice produces identical bytes, and a load reproduces every value bit for
 * bit.
 */
struct Checkpoint {
    std::vector<CheckpointSection> sections;

    void add(std::string name, const EncoderParams& p) {
        sections.push_back({std::move(name), p.shapes, p.seed, p.values});
    }

    void add_raw(std::string name, const Eigen::VectorXd& v, std::uint64_t seed = 0) {
        sections.push_back({std::move(name), {}, seed, v});
    }

    const CheckpointSection* find(std::string_view name) const {
        for (const auto& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }

    const CheckpointSection& at(std::string_view name) const {
        const CheckpointSection* s = find(name);
        if (!s) throw CheckpointError("checkpoint: missing section '" + std::string(name) + "'");
        return *s;
    }

    /// Reassembles an MLP section; raw sections have no shape table to honor.
    EncoderParams params(std::string_view name) const {
        const CheckpointSection& s = at(name);
        if (s.shapes.empty())
            throw CheckpointError("checkpoint: section '" + std::string(name) +
                                  "' carries no layer shapes");
        EncoderParams p;
        p.shapes = s.shapes;
        p.seed = s.seed;
        p.values = s.values;
        p.validate();
        return p;
    }
};

namespace detail {

inline void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian cursor over a loaded file.
struct ByteReader {
    std::string_view data;
    std::size_t pos = 0;
    std::string where;

    [[noreturn]] void fail(const std::string& msg) const {
        throw CheckpointError(where + ": " + msg);
    }

    void need(std::size_t n) const {
        if (pos + n > data.size()) fail("file truncated");
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 8;
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string str(std::size_t n) {
        need(n);
        std::string s(data.substr(pos, n));
        pos += n;
        return s;
    }
};

}  // namespace detail

inline constexpr std::string_view kCheckpointMagic = "PCREGCK1";

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::string buf;
    buf.append(kCheckpointMagic);
    detail::put_u32(buf, static_cast<std::uint32_t>(ck.sections.size()));
    for (const auto& s : ck.sections) {
        if (!s.shapes.empty() && s.values.size() != EncoderParams::count_for(s.shapes))
            throw std::invalid_argument("checkpoint: section '" + s.name +
                                        "' value count does not match its shapes");
        detail::put_u32(buf, static_cast<std::uint32_t>(s.name.size()));
        buf.append(s.name);
        detail::put_u64(buf, s.seed);
        detail::put_u32(buf, static_cast<std::uint32_t>(s.shapes.size()));
        for (const auto& shape : s.shapes) {
            detail::put_u32(buf, static_cast<std::uint32_t>(shape.in));
            detail::put_u32(buf, static_cast<std::uint32_t>(shape.out));
        }
        detail::put_u64(buf, static_cast<std::uint64_t>(s.values.size()));
        for (Eigen::Index i = 0; i < s.values.size(); ++i) detail::put_f64(buf, s.values[i]);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot open for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    detail::ByteReader r{bytes, 0, path.string()};
    if (r.str(std::min<std::size_t>(kCheckpointMagic.size(), bytes.size())) != kCheckpointMagic)
        r.fail("bad magic (not a checkpoint file)");

    Checkpoint ck;
    const std::uint32_t n_sections = r.u32();
    for (std::uint32_t si = 0; si < n_sections; ++si) {
        CheckpointSection s;
        const std::uint32_t name_len = r.u32();
        if (name_len > 4096) r.fail("unreasonable section name length");
        s.name = r.str(name_len);
        s.seed = r.u64();
        const std::uint32_t n_layers = r.u32();
        if (n_layers > 4096) r.fail("unreasonable layer count");
        s.shapes.reserve(n_layers);
        for (std::uint32_t l = 0; l < n_layers; ++l) {
            LayerShape shape;
            shape.in = static_cast<int>(r.u32());
            shape.out = static_cast<int>(r.u32());
            if (shape.in < 0 || shape.out < 0) r.fail("negative layer dimension");
            s.shapes.push_back(shape);
        }
        const std::uint64_t n_values = r.u64();
        if (n_values > (1ull << 30)) r.fail("unreasonable value count");
        if (!s.shapes.empty() &&
            n_values != static_cast<std::uint64_t>(EncoderParams::count_for(s.shapes)))
            r.fail("section '" + s.name + "' value count does not match its shape table");
        s.values.resize(static_cast<Eigen::Index>(n_values));
        for (std::uint64_t i = 0; i < n_values; ++i)
            s.values[static_cast<Eigen::Index>(i)] = r.f64();
        ck.sections.push_back(std::move(s));
    }
    if (r.pos != bytes.size()) r.fail("trailing bytes after last section");
    return ck;
}

}  // namespace pcreg
