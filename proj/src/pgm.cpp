#include "dnfs/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnfs {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
    throw std::runtime_error("pgm: " + path.string() + ": " + what);
}

void write_bytes(const std::filesystem::path& path, int h, int w,
                 const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open for writing");
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) fail(path, "write failed");
}

// Skips whitespace and '#' comment lines, then reads one non-negative integer.
int read_header_int(std::istream& in, const std::filesystem::path& path) {
    int ch = in.get();
    while (ch != std::istream::traits_type::eof()) {
        if (ch == '#') {
            while (ch != '\n' && ch != std::istream::traits_type::eof()) ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == std::istream::traits_type::eof() || !std::isdigit(ch))
        fail(path, "malformed header");
    long value = 0;
    while (std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        if (value > 1 << 20) fail(path, "header value out of range");
        ch = in.get();
    }
    in.unget();
    return int(value);
}

struct RawPgm {
    int h = 0, w = 0, maxval = 0;
    std::vector<std::uint8_t> bytes;
};

RawPgm read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (!in || m0 != 'P' || m1 != '5') fail(path, "not a binary PGM (missing P5 magic)");
    RawPgm raw;
    raw.w = read_header_int(in, path);
    raw.h = read_header_int(in, path);
    raw.maxval = read_header_int(in, path);
    if (raw.w <= 0 || raw.h <= 0) fail(path, "non-positive dimensions");
    if (raw.maxval <= 0 || raw.maxval > 255) fail(path, "unsupported maxval");
    in.get();  // the single whitespace byte before the payload
    raw.bytes.resize(std::size_t(raw.h) * raw.w);
    in.read(reinterpret_cast<char*>(raw.bytes.data()), std::streamsize(raw.bytes.size()));
    if (std::size_t(in.gcount()) != raw.bytes.size()) fail(path, "truncated payload");
    return raw;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const GridF& grid) {
    std::vector<std::uint8_t> bytes(grid.v.size());
    for (std::size_t i = 0; i < grid.v.size(); ++i) {
        const float v = grid.v[i];
        if (!(v >= 0.f && v <= 1.f)) fail(path, "value outside [0, 1]");
        bytes[i] = std::uint8_t(std::lround(v * 255.f));
    }
    write_bytes(path, grid.h, grid.w, bytes);
}

GridF read_pgm(const std::filesystem::path& path) {
    const RawPgm raw = read_bytes(path);
    GridF grid(raw.h, raw.w);
    for (std::size_t i = 0; i < raw.bytes.size(); ++i)
        grid.v[i] = float(raw.bytes[i]) / float(raw.maxval);
    return grid;
}

void write_mask_pgm(const std::filesystem::path& path, const MaskGrid& mask) {
    std::vector<std::uint8_t> bytes(mask.v.size());
    for (std::size_t i = 0; i < mask.v.size(); ++i) bytes[i] = mask.v[i] ? 0 : 255;
    write_bytes(path, mask.h, mask.w, bytes);
}

MaskGrid read_mask_pgm(const std::filesystem::path& path) {
    const RawPgm raw = read_bytes(path);
    MaskGrid mask(raw.h, raw.w);
    for (std::size_t i = 0; i < raw.bytes.size(); ++i) mask.v[i] = raw.bytes[i] < 128 ? 1 : 0;
    return mask;
}

}  // namespace dnfs
