// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vidbossa/errors.hpp"
#include "vidbossa/image.hpp"

namespace vidbossa {

/// Packed bitstring. Bit i lives in byte i/8 at position i%8 (LSB first);
/// in the 64-bit word view that is word i/64, bit i%64. Bits beyond the
/// declared length are kept zero.
struct BinaryDescriptor {
    uint32_t bits = 0;
    std::vector<uint64_t> words;

    BinaryDescriptor() = default;
    explicit BinaryDescriptor(uint32_t nbits) : bits(nbits), words(words_for(nbits), 0) {}
    BinaryDescriptor(uint32_t nbits, std::span<const uint64_t> w)
        : bits(nbits), words(w.begin(), w.end()) {}

    static size_t words_for(uint32_t nbits) { return (static_cast<size_t>(nbits) + 63) / 64; }

    bool get(uint32_t i) const { return (words[i / 64] >> (i % 64)) & 1u; }
    void set(uint32_t i, bool v) {
        if (v)
            words[i / 64] |= uint64_t{1} << (i % 64);
        else
            words[i / 64] &= ~(uint64_t{1} << (i % 64));
    }
};

/// The unordered set of binary descriptors of one keyframe, stored as one
/// contiguous word array (count * words_per_desc), ready for batch kernels.
struct DescriptorSet {
    uint32_t bits = 0;
    size_t count = 0;
    std::vector<uint64_t> words;
    std::string source_id;

    DescriptorSet() = default;
    explicit DescriptorSet(uint32_t nbits, std::string source = "")
        : bits(nbits), source_id(std::move(source)) {}

    size_t words_per_desc() const { return BinaryDescriptor::words_for(bits); }

    std::span<const uint64_t> at(size_t j) const {
        return {words.data() + j * words_per_desc(), words_per_desc()};
    }

    void push(std::span<const uint64_t> desc_words) {
        words.insert(words.end(), desc_words.begin(), desc_words.end());
        ++count;
    }
    void push(const BinaryDescriptor& d) {
        if (d.bits != bits) {
            throw ContractViolation("DescriptorSet::push: descriptor has " +
                                    std::to_string(d.bits) + " bits, set holds " +
                                    std::to_string(bits));
        }
        push(std::span<const uint64_t>(d.words));
    }
};

struct PointPair {
    int dx1, dy1, dx2, dy2;
    bool operator==(const PointPair&) const = default;
};

/// BRIEF comparison-pair layout. Offsets are relative to the patch center
/// and always satisfy |dx|,|dy| <= patch_size/2 - 1.
struct SamplingPattern {
    uint32_t n_pairs = 0;
    int patch_size = 0;
    uint64_t seed = 0;
    std::vector<PointPair> pairs;
};

struct DescriptorConfig {
    uint32_t bits = 256;
    int patch = 16;
    int step = 6;
    uint64_t seed = 42;
    int smooth_radius = 2;
};

/// Draws n_pairs comparison pairs from an isotropic Gaussian with
/// sigma = patch_size/5 (rejection-sampled into the patch), using the
/// xorshift64* PRNG described in rng.hpp. Deterministic in the seed.
SamplingPattern gen_pattern(uint64_t seed, uint32_t n_pairs, int patch_size);

/// bit i = 1 iff intensity at pair i's first point is strictly greater than
/// at its second point (equal intensities give 0).
BinaryDescriptor extract_brief(const GrayImage& img, int cx, int cy,
                               const SamplingPattern& pattern);

/// Smooths the image, then extracts one descriptor per dense-grid center,
/// in grid order.
DescriptorSet extract_frame(const GrayImage& img, const DescriptorConfig& cfg);
DescriptorSet extract_frame(const GrayImage& img, const DescriptorConfig& cfg,
                            const SamplingPattern& pattern);

// BDSC descriptor file: magic "BDSC", u8 version=1, u32le bits, u32le count,
// then count*bits/8 payload bytes packed LSB-first.
DescriptorSet read_descriptor_file(const std::filesystem::path& path);
void write_descriptor_file(const DescriptorSet& set, const std::filesystem::path& path);

} // namespace vidbossa
