#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <vector>

#include "lesionkit/core.hpp"
#include "lesionkit/errors.hpp"
#include "lesionkit/util.hpp"

namespace lesionkit {

/// Raw CT slice in Hounsfield units, row-major.
struct HuSlice {
    int width = 0;
    int height = 0;
    std::vector<std::int16_t> data;

    HuSlice(int w, int h, std::vector<std::int16_t> d) : width(w), height(h), data(std::move(d)) {
        if (w <= 0 || h <= 0) throw DimensionError("slice dimensions must be positive");
        if (data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
            throw DimensionError("slice data length does not match width*height");
    }

    std::int16_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

/// Display-windowed slice with 8-bit pixels and the HU window it came from.
struct WindowedSlice {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;
    double window_center = 0.0;
    double window_width = 0.0;

    WindowedSlice(int w, int h, std::vector<std::uint8_t> d, double center = 0.0, double width_hu = 0.0)
        : width(w), height(h), data(std::move(d)), window_center(center), window_width(width_hu) {
        if (w <= 0 || h <= 0) throw DimensionError("slice dimensions must be positive");
        if (data.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
            throw DimensionError("slice data length does not match width*height");
    }

    std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

    bool operator==(const WindowedSlice&) const = default;
};

// Linear map of [center - width/2, center + width/2] onto [0,255], clipped
// outside. Rounding is half away from zero so results are reproducible
// bit-for-bit.
inline WindowedSlice window_hu(const HuSlice& s, double center, double width) {
    if (!(width > 0)) throw InvalidWindowError("window width must be positive, got " + std::to_string(width));
    const double lower = center - width / 2.0;
    std::vector<std::uint8_t> out(s.data.size());
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        double v = 255.0 * (static_cast<double>(s.data[i]) - lower) / width;
        v = round_half_away(v);
        out[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return WindowedSlice(s.width, s.height, std::move(out), center, width);
}

/// Three consecutive windowed slices (below, key, above) forming the
/// channels of a 2.5D image.
struct Stack25D {
    std::array<WindowedSlice, 3> slices;
    int key_slice_index = 0;

    const WindowedSlice& below() const { return slices[0]; }
    const WindowedSlice& key() const { return slices[1]; }
    const WindowedSlice& above() const { return slices[2]; }
};

// Missing neighbors at a volume boundary are edge-replicated with the key
// slice. Pixel values are copied verbatim; no resampling happens here.
inline Stack25D stack_25d(const std::optional<WindowedSlice>& below, const WindowedSlice& key,
                          const std::optional<WindowedSlice>& above, int key_slice_index = 0) {
    for (const auto* n : {below ? &*below : nullptr, above ? &*above : nullptr}) {
        if (n && (n->width != key.width || n->height != key.height))
            throw DimensionError("2.5D stack requires identical slice dimensions, got " +
                                 std::to_string(n->width) + "x" + std::to_string(n->height) + " vs key " +
                                 std::to_string(key.width) + "x" + std::to_string(key.height));
    }
    return Stack25D{{below.value_or(key), key, above.value_or(key)}, key_slice_index};
}

// Bilinear resize with pixel-center alignment and replicated borders.
inline WindowedSlice resize_bilinear(const WindowedSlice& s, int target_w, int target_h) {
    if (target_w <= 0 || target_h <= 0) throw DimensionError("resize targets must be positive");
    std::vector<std::uint8_t> out(static_cast<std::size_t>(target_w) * target_h);
    const double sx = static_cast<double>(s.width) / target_w;
    const double sy = static_cast<double>(s.height) / target_h;
    for (int y = 0; y < target_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, s.height - 1);
        int y1c = std::clamp(y0 + 1, 0, s.height - 1);
        for (int x = 0; x < target_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, s.width - 1);
            int x1c = std::clamp(x0 + 1, 0, s.width - 1);
            double v = (1 - wy) * ((1 - wx) * s.at(x0c, y0c) + wx * s.at(x1c, y0c)) +
                       wy * ((1 - wx) * s.at(x0c, y1c) + wx * s.at(x1c, y1c));
            out[static_cast<std::size_t>(y) * target_w + x] =
                static_cast<std::uint8_t>(std::clamp(round_half_away(v), 0.0, 255.0));
        }
    }
    return WindowedSlice(target_w, target_h, std::move(out), s.window_center, s.window_width);
}

/// Scales box coordinates by (to_w/from_w, to_h/from_h).
inline BoundingBox rescale_box(const BoundingBox& b, double from_w, double from_h, double to_w, double to_h) {
    if (!(from_w > 0) || !(from_h > 0) || !(to_w > 0) || !(to_h > 0))
        throw DimensionError("rescale dimensions must be positive");
    double kx = to_w / from_w;
    double ky = to_h / from_h;
    return BoundingBox(b.x1 * kx, b.y1 * ky, b.x2 * kx, b.y2 * ky);
}

// ---------------------------------------------------------------------------
// Slice files. Little-endian throughout.
//   HUS1: "HUS1", u32 width, u32 height, width*height i16 HU values row-major
//   WIN1: "WIN1", u32 width, u32 height, width*height u8 pixels row-major
// WIN1 carries no window metadata; slices read back report a 0/0 window.

namespace detail {

inline void write_u32le(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

inline std::uint32_t read_u32le(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError(std::string("truncated ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void check_magic(std::istream& in, const char expected[4], const char* what) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, expected))
        throw FormatError(std::string("bad magic for ") + what + " (expected " +
                          std::string(expected, 4) + ")");
}

inline std::pair<int, int> read_dims(std::istream& in, const char* what) {
    std::uint32_t w = read_u32le(in, what);
    std::uint32_t h = read_u32le(in, what);
    if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
        throw FormatError(std::string("implausible dimensions in ") + what);
    return {static_cast<int>(w), static_cast<int>(h)};
}

} // namespace detail

inline void write_hu_slice(const HuSlice& s, std::ostream& out) {
    out.write("HUS1", 4);
    detail::write_u32le(out, static_cast<std::uint32_t>(s.width));
    detail::write_u32le(out, static_cast<std::uint32_t>(s.height));
    for (std::int16_t v : s.data) {
        std::uint16_t u = static_cast<std::uint16_t>(v);
        char b[2] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff)};
        out.write(b, 2);
    }
}

inline HuSlice read_hu_slice(std::istream& in) {
    detail::check_magic(in, "HUS1", "HU slice");
    auto [w, h] = detail::read_dims(in, "HU slice");
    std::vector<std::int16_t> data(static_cast<std::size_t>(w) * h);
    for (auto& v : data) {
        unsigned char b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2)) throw FormatError("truncated HU slice data");
        v = static_cast<std::int16_t>(static_cast<std::uint16_t>(b[0]) | (static_cast<std::uint16_t>(b[1]) << 8));
    }
    return HuSlice(w, h, std::move(data));
}

inline void write_windowed_slice(const WindowedSlice& s, std::ostream& out) {
    out.write("WIN1", 4);
    detail::write_u32le(out, static_cast<std::uint32_t>(s.width));
    detail::write_u32le(out, static_cast<std::uint32_t>(s.height));
    out.write(reinterpret_cast<const char*>(s.data.data()), static_cast<std::streamsize>(s.data.size()));
}

inline WindowedSlice read_windowed_slice(std::istream& in) {
    detail::check_magic(in, "WIN1", "windowed slice");
    auto [w, h] = detail::read_dims(in, "windowed slice");
    std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size())))
        throw FormatError("truncated windowed slice data");
    return WindowedSlice(w, h, std::move(data));
}

} // namespace lesionkit
