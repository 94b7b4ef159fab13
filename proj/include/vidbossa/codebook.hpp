// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vidbossa/descriptor.hpp"

namespace vidbossa {

/// Visual codebook: M binary centroids plus the per-cluster spread sigma_m
/// (population std of member distances to the centroid) that bounds the
/// BossaNova distance histograms.
struct Codebook {
    uint32_t M = 0;
    uint32_t D = 0;
    std::vector<uint64_t> words; // M centroids, contiguous
    std::vector<double> sigmas;
    uint64_t seed = 0;
    uint64_t train_size = 0;

    size_t words_per_desc() const { return BinaryDescriptor::words_for(D); }
    std::span<const uint64_t> centroid(uint32_t m) const {
        return {words.data() + static_cast<size_t>(m) * words_per_desc(), words_per_desc()};
    }
    BinaryDescriptor centroid_descriptor(uint32_t m) const {
        return BinaryDescriptor(D, centroid(m));
    }
};

struct Neighbor {
    uint32_t index;
    uint32_t distance;
    bool operator==(const Neighbor&) const = default;
};

/// k nearest codewords, sorted by distance then index.
struct Assignment {
    std::vector<Neighbor> neighbors;
};

/// Per-run diagnostics: cost after each assignment step (non-increasing)
/// and the final point-to-cluster map.
struct KMediansResult {
    Codebook codebook;
    std::vector<uint64_t> iteration_costs;
    std::vector<uint32_t> final_assignment;
    std::vector<uint32_t> cluster_sizes;
    uint32_t iterations = 0;
    bool converged = false;
};

/// Number of differing bits. Descriptor lengths must match.
uint32_t hamming(const BinaryDescriptor& a, const BinaryDescriptor& b);

/// Lloyd-style k-medians in Hamming space. Assignment ties go to the lowest
/// codeword index; the centroid update is the per-bit majority (ties keep
/// the previous bit), which is the exact 1-median; empty clusters are
/// reseeded from the point farthest from its assigned centroid. Stops when
/// assignments stabilize or after max_iter iterations.
KMediansResult kmedians(const DescriptorSet& train, uint32_t M, uint32_t max_iter,
                        uint64_t seed);

/// The k nearest codewords of x, ties broken by lower index.
Assignment assign_knn(const BinaryDescriptor& x, const Codebook& cb, uint32_t k);
Assignment assign_knn(std::span<const uint64_t> x_words, uint32_t x_bits, const Codebook& cb,
                      uint32_t k);

/// Uniform sample without replacement of up to `limit` descriptors across
/// all sets (all of them when the pool is smaller). Deterministic in seed.
DescriptorSet sample_pool(const std::vector<DescriptorSet>& sets, size_t limit, uint64_t seed);

// Codebook file: magic "BCBK", u8 version=1, u32le M, u32le D, M packed
// centroids, then M f64le sigmas.
Codebook read_codebook_file(const std::filesystem::path& path);
void write_codebook_file(const Codebook& cb, const std::filesystem::path& path);

} // namespace vidbossa
