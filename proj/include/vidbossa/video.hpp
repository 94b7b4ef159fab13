// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "vidbossa/encoding.hpp"

namespace vidbossa {

enum class AggFn : uint8_t { Max, Min, Mean, Median };

AggFn parse_agg_fn(const std::string& name);
const char* agg_fn_name(AggFn fn);

/// Video-level descriptor: elementwise aggregation of per-frame mid-level
/// vectors. For BossaNova layouts the histogram part uses agg_z and the
/// tail part agg_t; BoW uses agg_z for the whole vector.
struct VideoDescriptor {
    Layout layout = Layout::BOW;
    uint32_t M = 0;
    uint32_t B = 0;
    std::vector<double> values;
    AggFn agg_z = AggFn::Median;
    AggFn agg_t = AggFn::Median;
    uint32_t n_frames = 0;
};

struct VideoManifestEntry {
    std::string video_id;
    int label = 0; // +1 / -1
    int fold = 0;
    std::vector<std::string> keyframes;
};

enum class TieRule : uint8_t { Positive, Negative };

/// Aggregates per-frame vectors into one video descriptor. The median of an
/// even count is the mean of the two middle values; mean sums frames in
/// order so results are bit-stable.
VideoDescriptor aggregate(std::span<const MidLevelVector> frames, AggFn agg_z, AggFn agg_t);

/// Majority vote over frame labels; strictly greater count wins, exact ties
/// resolve by tie_rule.
int majority_vote(std::span<const int> frame_labels, TieRule tie_rule);

struct EncoderConfig {
    Layout kind = Layout::BOSSANOVA;
    BossaParams bossa;
    bool normalize_counts = true;
    NormMode final_norm = NormMode::L2;
};

MidLevelVector encode_frame(const DescriptorSet& set, const Codebook& cb,
                            const EncoderConfig& cfg);

/// Baseline: concatenates every frame's descriptors and encodes once.
MidLevelVector global_pool(std::span<const DescriptorSet> frames, const Codebook& cb,
                           const EncoderConfig& cfg);

// Manifest: JSON lines, one object per video:
// {"video_id": str, "label": 1|-1, "fold": int, "keyframes": [paths]}
std::vector<VideoManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<VideoManifestEntry>& entries,
                    const std::filesystem::path& path);

} // namespace vidbossa
