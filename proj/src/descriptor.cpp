// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/descriptor.hpp"

#include <cmath>

#include "vidbossa/io_util.hpp"
#include "vidbossa/rng.hpp"

namespace vidbossa {

namespace {

// Rounds a Gaussian draw to an integer offset inside [-bound, bound].
int sample_offset(Rng& rng, double sigma, int bound, double pending[2], int& pending_count) {
    for (;;) {
        double z;
        if (pending_count > 0) {
            z = pending[--pending_count];
        } else {
            double z0, z1;
            rng.next_gaussian_pair(z0, z1);
            pending[0] = z1;
            pending_count = 1;
            z = z0;
        }
        const long v = std::lround(z * sigma);
        if (v >= -bound && v <= bound) return static_cast<int>(v);
    }
}

} // namespace

SamplingPattern gen_pattern(uint64_t seed, uint32_t n_pairs, int patch_size) {
    if (n_pairs != 128 && n_pairs != 256 && n_pairs != 512) {
        throw ConfigError("gen_pattern: descriptor length must be 128, 256 or 512 bits, got " +
                          std::to_string(n_pairs));
    }
    if (patch_size < 4) {
        throw ConfigError("gen_pattern: patch_size must be >= 4, got " +
                          std::to_string(patch_size));
    }

    SamplingPattern p;
    p.n_pairs = n_pairs;
    p.patch_size = patch_size;
    p.seed = seed;
    p.pairs.reserve(n_pairs);

    Rng rng(seed);
    const double sigma = patch_size / 5.0;
    const int bound = patch_size / 2 - 1;
    double pending[2];
    int pending_count = 0;
    for (uint32_t i = 0; i < n_pairs; ++i) {
        PointPair pair{};
        pair.dx1 = sample_offset(rng, sigma, bound, pending, pending_count);
        pair.dy1 = sample_offset(rng, sigma, bound, pending, pending_count);
        pair.dx2 = sample_offset(rng, sigma, bound, pending, pending_count);
        pair.dy2 = sample_offset(rng, sigma, bound, pending, pending_count);
        p.pairs.push_back(pair);
    }
    return p;
}

BinaryDescriptor extract_brief(const GrayImage& img, int cx, int cy,
                               const SamplingPattern& pattern) {
    const int half = pattern.patch_size / 2;
    const int hi = pattern.patch_size - half - 1; // last in-patch offset on the + side
    if (cx - half < 0 || cy - half < 0 || cx + hi >= img.width || cy + hi >= img.height) {
        throw ContractViolation("extract_brief: patch at (" + std::to_string(cx) + "," +
                                std::to_string(cy) + ") exceeds image bounds " +
                                std::to_string(img.width) + "x" + std::to_string(img.height));
    }
    BinaryDescriptor d(pattern.n_pairs);
    for (uint32_t i = 0; i < pattern.n_pairs; ++i) {
        const PointPair& pr = pattern.pairs[i];
        const uint8_t a = img.at(cx + pr.dx1, cy + pr.dy1);
        const uint8_t b = img.at(cx + pr.dx2, cy + pr.dy2);
        if (a > b) d.set(i, true);
    }
    return d;
}

DescriptorSet extract_frame(const GrayImage& img, const DescriptorConfig& cfg) {
    const SamplingPattern pattern = gen_pattern(cfg.seed, cfg.bits, cfg.patch);
    return extract_frame(img, cfg, pattern);
}

DescriptorSet extract_frame(const GrayImage& img, const DescriptorConfig& cfg,
                            const SamplingPattern& pattern) {
    const GrayImage smoothed = box_smooth(img, cfg.smooth_radius);
    const PatchGrid grid = dense_grid(smoothed, cfg.patch, cfg.step);
    DescriptorSet set(cfg.bits);
    set.words.reserve(grid.centers.size() * set.words_per_desc());
    for (const auto& c : grid.centers) {
        set.push(extract_brief(smoothed, c.x, c.y, pattern).words);
    }
    return set;
}

namespace {
constexpr char kBdscMagic[4] = {'B', 'D', 'S', 'C'};
}

void write_descriptor_file(const DescriptorSet& set, const std::filesystem::path& path) {
    if (set.bits % 8 != 0) {
        throw ContractViolation("BDSC: descriptor bits must be a multiple of 8, got " +
                                std::to_string(set.bits));
    }
    ByteWriter w;
    w.bytes(kBdscMagic, 4);
    w.u8(1);
    w.u32le(set.bits);
    w.u32le(static_cast<uint32_t>(set.count));
    const size_t bytes_per_desc = set.bits / 8;
    const size_t wpd = set.words_per_desc();
    for (size_t j = 0; j < set.count; ++j) {
        const uint64_t* dw = set.words.data() + j * wpd;
        for (size_t b = 0; b < bytes_per_desc; ++b) {
            w.u8(static_cast<uint8_t>(dw[b / 8] >> (8 * (b % 8))));
        }
    }
    write_file_bytes(path, w.data());
}

DescriptorSet read_descriptor_file(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kBdscMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic \"" +
                          std::string(reinterpret_cast<const char*>(magic), 4) +
                          "\" (expected BDSC)");
    }
    const uint8_t version = r.u8();
    if (version != 1) {
        throw FormatError(path.string() + ": unsupported BDSC version " +
                          std::to_string(version));
    }
    const uint32_t bits = r.u32le();
    if (bits == 0 || bits % 8 != 0) {
        throw FormatError(path.string() + ": descriptor bits " + std::to_string(bits) +
                          " is not a positive multiple of 8");
    }
    const uint32_t count = r.u32le();

    DescriptorSet set(bits, path.string());
    const size_t bytes_per_desc = bits / 8;
    const size_t wpd = set.words_per_desc();
    set.words.assign(static_cast<size_t>(count) * wpd, 0);
    for (size_t j = 0; j < count; ++j) {
        const uint8_t* payload = r.take(bytes_per_desc);
        uint64_t* dw = set.words.data() + j * wpd;
        for (size_t b = 0; b < bytes_per_desc; ++b) {
            dw[b / 8] |= static_cast<uint64_t>(payload[b]) << (8 * (b % 8));
        }
    }
    set.count = count;
    return set;
}

} // namespace vidbossa
