// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "nm/errors.hpp"
#include "nm/tonemap.hpp"
#include "nm/vec.hpp"

namespace nm {

static_assert(std::endian::native == std::endian::little, "little-endian host assumed");

// Linear-radiance raster. Layers, when present, split the image into the
// single-scattering (direct) and multiple-scattering (indirect) parts.
struct HdrImage {
    int width = 0, height = 0;
    std::vector<Rgb> rgb;
    std::vector<Rgb> direct;    // empty when absent
    std::vector<Rgb> indirect;  // empty when absent

    HdrImage() = default;
    HdrImage(int w, int h) : width(w), height(h), rgb(size_t(w) * h) {}

    size_t pixel_count() const { return size_t(width) * height; }
    Rgb& at(int x, int y) { return rgb[size_t(y) * width + x]; }
    const Rgb& at(int x, int y) const { return rgb[size_t(y) * width + x]; }
    bool has_layers() const { return !direct.empty() && !indirect.empty(); }

    void alloc_layers() {
        direct.assign(pixel_count(), Rgb{});
        indirect.assign(pixel_count(), Rgb{});
    }

    bool all_finite() const {
        for (const Rgb& p : rgb)
            if (!is_finite(p)) return false;
        return true;
    }
};

// --- PFM ------------------------------------------------------------------
// "PF\n<w> <h>\n<scale>\n" followed by float32 triples, rows bottom-to-top.
// Negative scale marks little-endian data; positive-scale (big-endian) files
// are byte-swapped on read. |scale| != 1 multiplies into the pixels.

inline void write_pfm(const std::string& path, const std::vector<Rgb>& pixels, int width,
                      int height) {
    for (const Rgb& p : pixels)
        if (!is_finite(p)) throw std::domain_error("write_pfm: non-finite pixel");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("write_pfm: cannot open " + path);
    f << "PF\n" << width << " " << height << "\n-1.0\n";
    std::vector<float> row(size_t(width) * 3);
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x) {
            const Rgb& p = pixels[size_t(y) * width + x];
            row[size_t(x) * 3 + 0] = float(p.x);
            row[size_t(x) * 3 + 1] = float(p.y);
            row[size_t(x) * 3 + 2] = float(p.z);
        }
        f.write(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    if (!f) throw io_error("write_pfm: short write to " + path);
}

inline void write_pfm(const std::string& path, const HdrImage& image) {
    write_pfm(path, image.rgb, image.width, image.height);
}

inline HdrImage read_pfm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("read_pfm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "PF") throw io_error("read_pfm: not a color PFM file: " + path);
    int width = 0, height = 0;
    double scale = 0.0;
    f >> width >> height >> scale;
    if (!f || width <= 0 || height <= 0 || scale == 0.0)
        throw io_error("read_pfm: malformed header in " + path);
    f.get();  // single whitespace after the scale
    HdrImage image(width, height);
    const bool big_endian = scale > 0.0;
    const double factor = std::abs(scale);
    std::vector<float> row(size_t(width) * 3);
    for (int y = height - 1; y >= 0; --y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size() * sizeof(float));
        if (!f) throw io_error("read_pfm: truncated pixel data in " + path);
        for (int x = 0; x < width; ++x) {
            float r = row[size_t(x) * 3 + 0], g = row[size_t(x) * 3 + 1],
                  b = row[size_t(x) * 3 + 2];
            if (big_endian) {
                auto bswap = [](float v) {
                    uint32_t u;
                    std::memcpy(&u, &v, 4);
                    u = __builtin_bswap32(u);
                    std::memcpy(&v, &u, 4);
                    return v;
                };
                r = bswap(r); g = bswap(g); b = bswap(b);
            }
            image.at(x, y) = Rgb{r * factor, g * factor, b * factor};
        }
    }
    return image;
}

// --- PNG preview ------------------------------------------------------------
// 8-bit preview: tone map, then gamma 1/2.2. Minimal encoder on top of zlib.

namespace detail {

inline void png_chunk(std::ofstream& f, const char* type, const std::vector<uint8_t>& payload) {
    auto be32 = [](uint32_t v) {
        return std::array<uint8_t, 4>{uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8),
                                      uint8_t(v)};
    };
    const auto len = be32(uint32_t(payload.size()));
    f.write(reinterpret_cast<const char*>(len.data()), 4);
    f.write(type, 4);
    if (!payload.empty())
        f.write(reinterpret_cast<const char*>(payload.data()), std::streamsize(payload.size()));
    uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!payload.empty()) crc = crc32(crc, payload.data(), uInt(payload.size()));
    const auto c = be32(crc);
    f.write(reinterpret_cast<const char*>(c.data()), 4);
}

}  // namespace detail

inline void write_png_preview(const std::string& path, const HdrImage& image) {
    std::vector<uint8_t> raw;
    raw.reserve(size_t(image.height) * (1 + size_t(image.width) * 3));
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);  // filter: none
        for (int x = 0; x < image.width; ++x) {
            const Rgb mapped = tone_map(max(image.at(x, y), Rgb{}));
            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::pow(std::clamp(mapped[ch], 0.0, 1.0), 1.0 / 2.2);
                raw.push_back(uint8_t(std::lround(v * 255.0)));
            }
        }
    }
    uLongf compressed_size = compressBound(uLong(raw.size()));
    std::vector<uint8_t> compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, raw.data(), uLong(raw.size()), 6) != Z_OK)
        throw io_error("write_png_preview: zlib compression failed");
    compressed.resize(compressed_size);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("write_png_preview: cannot open " + path);
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    f.write(reinterpret_cast<const char*>(sig), 8);
    std::vector<uint8_t> ihdr(13);
    auto put32 = [&](size_t off, uint32_t v) {
        ihdr[off] = uint8_t(v >> 24); ihdr[off + 1] = uint8_t(v >> 16);
        ihdr[off + 2] = uint8_t(v >> 8); ihdr[off + 3] = uint8_t(v);
    };
    put32(0, uint32_t(image.width));
    put32(4, uint32_t(image.height));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    detail::png_chunk(f, "IHDR", ihdr);
    detail::png_chunk(f, "IDAT", compressed);
    detail::png_chunk(f, "IEND", {});
    if (!f) throw io_error("write_png_preview: short write to " + path);
}

// Writes base.pfm (+ _direct/_indirect layers when present) and a PNG preview.
inline void write_image_set(const std::string& base_path, const HdrImage& image,
                            bool png_preview = true) {
    write_pfm(base_path + ".pfm", image);
    if (image.has_layers()) {
        write_pfm(base_path + "_direct.pfm", image.direct, image.width, image.height);
        write_pfm(base_path + "_indirect.pfm", image.indirect, image.width, image.height);
    }
    if (png_preview) write_png_preview(base_path + ".png", image);
}

}  // namespace nm
