// Copyright (c) the neuralmedia contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "nm/errors.hpp"
#include "nm/media.hpp"

namespace nm {

// Grid payload container: 32-byte header (magic "NMGRID01", little-endian
// u32 nx, ny, nz, channel count, 8 reserved bytes), then row-major f32 voxels
// with channels interleaved (sigma, aR, aG, aB, g). z varies fastest.
inline constexpr char kGridMagic[8] = {'N', 'M', 'G', 'R', 'I', 'D', '0', '1'};

inline void write_grid(const std::string& path, const GridField& grid) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("write_grid: cannot open " + path);
    char header[32] = {};
    std::memcpy(header, kGridMagic, 8);
    const uint32_t dims[4] = {uint32_t(grid.nx()), uint32_t(grid.ny()), uint32_t(grid.nz()),
                              uint32_t(GridField::kChannels)};
    std::memcpy(header + 8, dims, 16);
    f.write(header, 32);
    f.write(reinterpret_cast<const char*>(grid.data().data()),
            std::streamsize(grid.data().size() * sizeof(float)));
    if (!f) throw io_error("write_grid: short write to " + path);
}

// Bounds are not part of the payload; the scene file supplies them.
inline std::shared_ptr<GridField> read_grid(const std::string& path, const Aabb& bounds) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("read_grid: cannot open " + path);
    char header[32];
    f.read(header, 32);
    if (!f || std::memcmp(header, kGridMagic, 8) != 0)
        throw io_error("read_grid: bad magic in " + path);
    uint32_t dims[4];
    std::memcpy(dims, header + 8, 16);
    if (dims[3] != GridField::kChannels)
        throw io_error("read_grid: unexpected channel count in " + path);
    if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2 || dims[0] > 4096 || dims[1] > 4096 ||
        dims[2] > 4096)
        throw io_error("read_grid: implausible resolution in " + path);
    std::vector<float> data(size_t(dims[0]) * dims[1] * dims[2] * dims[3]);
    f.read(reinterpret_cast<char*>(data.data()), std::streamsize(data.size() * sizeof(float)));
    if (!f) throw io_error("read_grid: truncated payload in " + path);
    return std::make_shared<GridField>(int(dims[0]), int(dims[1]), int(dims[2]), bounds,
                                       std::move(data));
}

}  // namespace nm
