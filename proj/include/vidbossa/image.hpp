// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidbossa/errors.hpp"

namespace vidbossa {

/// 8-bit grayscale image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> data;

    GrayImage() = default;
    GrayImage(int w, int h, std::vector<uint8_t> px);
    GrayImage(int w, int h, uint8_t fill = 0);

    uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
};

struct PatchGrid {
    int patch_size = 0;
    int step = 0;
    struct Center {
        int x;
        int y;
        bool operator==(const Center&) const = default;
    };
    std::vector<Center> centers; // row-major order
};

/// Reads a binary 8-bit grayscale PGM ("P5"). Header comments (#) are
/// tolerated; anything but P5 with maxval 255 is rejected.
GrayImage load_pgm(const std::filesystem::path& path);

/// Writes `P5\n<w> <h>\n255\n` followed by raw bytes. Never emits comments,
/// so load_pgm(write_pgm(img)) round-trips byte-identically.
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

/// Box filter with clamped (edge-shrunk) windows. Each output pixel is the
/// integer mean of the window, rounded half up. Backed by an integral image,
/// O(1) per pixel. radius 0 is the identity.
GrayImage box_smooth(const GrayImage& img, int radius);

/// All centers of fully contained patch_size x patch_size patches, starting
/// at offset patch_size/2 and spaced `step` apart per axis. An image smaller
/// than one patch yields an empty grid.
PatchGrid dense_grid(const GrayImage& img, int patch_size, int step);

} // namespace vidbossa
