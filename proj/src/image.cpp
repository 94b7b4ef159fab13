// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

#include "vidbossa/io_util.hpp"

namespace vidbossa {

GrayImage::GrayImage(int w, int h, std::vector<uint8_t> px)
    : width(w), height(h), data(std::move(px)) {
    if (w < 1 || h < 1) {
        throw ContractViolation("GrayImage: dimensions must be >= 1, got " + std::to_string(w) +
                                "x" + std::to_string(h));
    }
    if (data.size() != static_cast<size_t>(w) * static_cast<size_t>(h)) {
        throw ContractViolation("GrayImage: data length " + std::to_string(data.size()) +
                                " does not equal width*height " + std::to_string(w * h));
    }
}

GrayImage::GrayImage(int w, int h, uint8_t fill)
    : GrayImage(w, h, std::vector<uint8_t>(static_cast<size_t>(w) * h, fill)) {}

namespace {

// Reads the next whitespace/comment-delimited header token. PGM allows
// '#'-to-end-of-line comments anywhere whitespace may appear.
std::string next_header_token(ByteReader& r, const std::string& field) {
    std::string tok;
    for (;;) {
        if (r.remaining() == 0) {
            throw FormatError("PGM header: unexpected end of file while reading " + field);
        }
        const char c = static_cast<char>(r.u8());
        if (c == '#') {
            while (r.remaining() > 0 && static_cast<char>(r.u8()) != '\n') {
            }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(c);
        // Token ends at the next whitespace; the delimiter is consumed here,
        // which is exactly the single byte PGM requires before pixel data.
        while (r.remaining() > 0) {
            const char d = static_cast<char>(r.u8());
            if (std::isspace(static_cast<unsigned char>(d))) return tok;
            if (d == '#') {
                while (r.remaining() > 0 && static_cast<char>(r.u8()) != '\n') {
                }
                return tok;
            }
            tok.push_back(d);
        }
        return tok;
    }
}

int parse_header_int(const std::string& tok, const std::string& field) {
    if (tok.empty()) throw FormatError("PGM header: empty " + field);
    for (char c : tok) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            throw FormatError("PGM header: " + field + " is not a number: \"" + tok + "\"");
        }
    }
    try {
        return std::stoi(tok);
    } catch (const std::exception&) {
        throw FormatError("PGM header: " + field + " out of range: \"" + tok + "\"");
    }
}

} // namespace

GrayImage load_pgm(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());

    const std::string magic = next_header_token(r, "magic");
    if (magic != "P5") {
        throw FormatError(path.string() + ": unsupported magic \"" + magic +
                          "\" (only binary grayscale P5 is supported)");
    }
    const int width = parse_header_int(next_header_token(r, "width"), "width");
    const int height = parse_header_int(next_header_token(r, "height"), "height");
    const int maxval = parse_header_int(next_header_token(r, "maxval"), "maxval");
    if (width < 1 || height < 1) {
        throw FormatError(path.string() + ": invalid dimensions " + std::to_string(width) + "x" +
                          std::to_string(height));
    }
    if (maxval != 255) {
        throw FormatError(path.string() + ": unsupported maxval " + std::to_string(maxval) +
                          " (only 8-bit images with maxval 255 are supported)");
    }
    const size_t npix = static_cast<size_t>(width) * height;
    const uint8_t* px = r.take(npix);
    return GrayImage(width, height, std::vector<uint8_t>(px, px + npix));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()),
              static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

GrayImage box_smooth(const GrayImage& img, int radius) {
    if (radius < 0) throw ContractViolation("box_smooth: radius must be >= 0");
    if (radius == 0) return img;

    const int w = img.width;
    const int h = img.height;
    // integral[y][x] = sum of pixels in [0,x) x [0,y); (w+1)x(h+1).
    std::vector<uint64_t> integral(static_cast<size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
        uint64_t row = 0;
        for (int x = 0; x < w; ++x) {
            row += img.at(x, y);
            integral[static_cast<size_t>(y + 1) * (w + 1) + (x + 1)] =
                integral[static_cast<size_t>(y) * (w + 1) + (x + 1)] + row;
        }
    }
    auto rect_sum = [&](int x0, int y0, int x1, int y1) { // inclusive corners
        const size_t stride = static_cast<size_t>(w + 1);
        return integral[(y1 + 1) * stride + (x1 + 1)] - integral[(y0) * stride + (x1 + 1)] -
               integral[(y1 + 1) * stride + (x0)] + integral[(y0) * stride + (x0)];
    };

    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const int y0 = y - radius < 0 ? 0 : y - radius;
        const int y1 = y + radius >= h ? h - 1 : y + radius;
        for (int x = 0; x < w; ++x) {
            const int x0 = x - radius < 0 ? 0 : x - radius;
            const int x1 = x + radius >= w ? w - 1 : x + radius;
            const uint64_t sum = rect_sum(x0, y0, x1, y1);
            const uint64_t count = static_cast<uint64_t>(x1 - x0 + 1) * (y1 - y0 + 1);
            out.at(x, y) = static_cast<uint8_t>((2 * sum + count) / (2 * count));
        }
    }
    return out;
}

PatchGrid dense_grid(const GrayImage& img, int patch_size, int step) {
    if (patch_size < 1) throw ConfigError("dense_grid: patch_size must be >= 1");
    if (step < 1) throw ConfigError("dense_grid: step must be >= 1");

    PatchGrid grid;
    grid.patch_size = patch_size;
    grid.step = step;
    if (img.width < patch_size || img.height < patch_size) return grid;

    const int half = patch_size / 2;
    const int nx = (img.width - patch_size) / step + 1;
    const int ny = (img.height - patch_size) / step + 1;
    grid.centers.reserve(static_cast<size_t>(nx) * ny);
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            grid.centers.push_back({half + ix * step, half + iy * step});
        }
    }
    return grid;
}

} // namespace vidbossa
