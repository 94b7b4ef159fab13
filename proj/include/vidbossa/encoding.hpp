// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidbossa/codebook.hpp"
#include "vidbossa/descriptor.hpp"

namespace vidbossa {

enum class Layout : uint8_t { BOW = 0, BOSSANOVA = 1 };

/// BossaNova knobs. For each codeword m the histogram covers Hamming
/// distances in [lambda_min*sigma_m, lambda_max*sigma_m] split into B
/// equal-width bins; s scales the per-codeword nearest-count tail; knn is
/// the localized soft-assignment neighborhood.
struct BossaParams {
    uint32_t B = 10;
    double lambda_min = 0.0;
    double lambda_max = 3.0;
    double s = 1e-3;
    uint32_t knn = 10;

    void validate() const;
};

/// Real-valued frame representation. BOW has length M (B stays 0);
/// BOSSANOVA has length M*(B+1): M*B histogram bins grouped by codeword,
/// then M tail entries s*t_m.
struct MidLevelVector {
    Layout layout = Layout::BOW;
    uint32_t M = 0;
    uint32_t B = 0;
    std::vector<double> values;

    size_t expected_length() const {
        return layout == Layout::BOW ? M : static_cast<size_t>(M) * (B + 1);
    }
};

enum class NormMode : uint8_t { None, L2 };

/// Hard-assignment histogram with average pooling: h[m] = (# descriptors
/// whose nearest codeword is m) / N. Empty sets encode to the zero vector.
MidLevelVector encode_bow(const DescriptorSet& set, const Codebook& cb);

/// BossaNova encoding. Each descriptor contributes to the distance
/// histograms of its knn nearest codewords (bins are half-open, the last
/// closed at the upper bound) and to exactly one nearest-count tail.
/// With normalize_counts, all counts are divided by N.
MidLevelVector encode_bossanova(const DescriptorSet& set, const Codebook& cb,
                                const BossaParams& params, bool normalize_counts = true);

MidLevelVector normalize(const MidLevelVector& v, NormMode mode);

// Feature file: magic "BFVC", u8 version=1, u8 layout, u32le M, u32le B,
// u32le length, then length f64le values.
MidLevelVector read_feature_file(const std::filesystem::path& path);
void write_feature_file(const MidLevelVector& v, const std::filesystem::path& path);

} // namespace vidbossa
