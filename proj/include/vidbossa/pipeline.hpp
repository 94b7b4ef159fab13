// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "vidbossa/eval.hpp"
#include "vidbossa/synth.hpp"

namespace vidbossa {

/// Flat key/value run configuration. Every tunable of every stage lives
/// here; unknown keys are rejected with a nearest-key suggestion, and every
/// run writes the fully resolved document back out.
///
/// All randomness fans out from the single `seed` key: each stage derives
/// its own stream via derive_seed(seed, stage_name).
struct RunConfig {
    uint64_t seed = 7;
    std::string manifest; // path to an existing manifest; empty = synthesize

    // synth (used when manifest is empty)
    uint32_t videos_per_class = 20;
    uint32_t frames_min = 5;
    uint32_t frames_max = 12;
    uint32_t image_size = 128;
    uint32_t folds = 5;
    double class_gap = 1.0;

    // descriptors
    uint32_t bits = 256;
    int patch = 16;
    int step = 6;
    int smooth_radius = 2;

    // codebook
    uint32_t codebook_size = 64;
    uint32_t max_iter = 100;
    uint64_t sample = 1000000;

    // encoder
    std::string encoder = "bossanova";
    uint32_t bins = 10;
    double lambda_min = 0.0;
    double lambda_max = 3.0;
    double s = 1e-3;
    uint32_t knn = 10;
    bool raw_counts = false;
    std::string normalization = "l2";

    // video
    std::string agg_z = "median";
    std::string agg_t = "median";
    std::string tie_rule = "positive";

    // classifier
    std::string metric = "l2";
    double C = 10.0;
    std::string gamma = "auto"; // "auto" or a positive number
    double svm_tol = 1e-3;
    uint32_t max_passes = 200;

    // protocol
    bool shared_codebook = false;
    uint32_t threads = 1;

    static RunConfig parse_file(const std::filesystem::path& path);
    static RunConfig parse_text(const std::string& text, const std::string& origin = "config");

    std::string echo() const;
    CvConfig to_cv_config(CvMode mode = CvMode::VideoDescriptor) const;
    CorpusSpec to_corpus_spec() const;
    DescriptorConfig to_descriptor_config() const;
};

struct PipelineResult {
    std::filesystem::path manifest_path;
    std::filesystem::path report_dir;
    CvReport report;
};

/// Runs synth (unless a manifest is given) -> extract -> evaluate, staging
/// artifacts under out_dir. Stages whose content-hash stamp still matches
/// their inputs are skipped and reported as cached on `log`.
PipelineResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir,
                            std::ostream& log);

/// Human-readable header summary of a BDSC/BCBK/BFVC/BSVM artifact.
std::string describe_artifact(const std::filesystem::path& path);

} // namespace vidbossa
