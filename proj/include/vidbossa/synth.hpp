// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "vidbossa/image.hpp"
#include "vidbossa/rng.hpp"
#include "vidbossa/video.hpp"

namespace vidbossa {

/// Two-class synthetic corpus knobs. class_gap in (0, 1] scales how far the
/// two texture families sit apart in frequency content: 1.0 keeps the
/// positive class at maximally crisp cell noise, values near 0 smooth it
/// toward the negative class's low-frequency look.
struct CorpusSpec {
    uint64_t seed = 7;
    uint32_t videos_per_class = 20;
    uint32_t frames_min = 5;
    uint32_t frames_max = 12;
    uint32_t image_size = 128;
    uint32_t folds = 5;
    double class_gap = 1.0;

    void validate() const;
};

/// Per-video texture style. Positive videos render high-frequency binary
/// cell noise; negative videos render a smooth linear gradient plus a few
/// quadratic blobs and faint pixel noise. All arithmetic is integer, so
/// rendered frames are byte-identical across platforms.
class TextureStyle {
public:
    static TextureStyle sample(int label, const CorpusSpec& spec, Rng& rng);
    GrayImage render(uint32_t size, Rng& rng) const;
    int label() const { return label_; }

private:
    int label_ = 0;
    // positive class
    int cell_size_ = 1;
    int smooth_radius_ = 0;
    int lo_ = 0, hi_ = 255;
    // negative class
    int base_ = 128;
    int grad_x_ = 0, grad_y_ = 0; // intensity per 64 px
    int n_blobs_ = 0;
    int blob_amp_[3] = {0, 0, 0};
    int blob_r_[3] = {0, 0, 0};
};

struct GeneratedCorpus {
    std::filesystem::path manifest_path;
    std::vector<VideoManifestEntry> entries;
};

/// Writes PGM keyframes under out_dir/frames/ and a JSON-lines manifest at
/// out_dir/manifest.jsonl (keyframe paths relative to out_dir). Folds are
/// assigned round-robin per class. Fully determined by spec.seed.
GeneratedCorpus generate(const CorpusSpec& spec, const std::filesystem::path& out_dir);

/// Replaces k distinct frames (chosen by rng) with frames drawn from
/// other_class_frame. Returns the replaced indices, sorted.
std::vector<size_t> inject_minority_frames(std::vector<GrayImage>& frames, size_t k,
                                           const std::function<GrayImage()>& other_class_frame,
                                           Rng& rng);

} // namespace vidbossa
