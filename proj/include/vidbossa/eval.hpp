// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "vidbossa/svm.hpp"
#include "vidbossa/video.hpp"

namespace vidbossa {

struct ScoredLabel {
    double score;
    int label; // +1 / -1
};

struct RocPoint {
    double fpr;
    double tpr;
};

/// ROC by descending-threshold sweep with tied scores grouped into one
/// step. Starts at (0,0), ends at (1,1).
std::vector<RocPoint> roc_curve(std::vector<ScoredLabel> scored);

/// Trapezoidal area under roc_curve; equals the Mann-Whitney statistic
/// with ties counted 1/2. Requires both labels present.
double auc(const std::vector<ScoredLabel>& scored);

/// TPR at the given FPR on a piecewise-linear ROC (vertical jumps take the
/// upper value). Used for vertical averaging of fold curves.
double roc_interpolate(const std::vector<RocPoint>& roc, double fpr);

struct FoldReport {
    int fold = 0;
    double accuracy = 0.0;
    uint64_t tp = 0, fn = 0, fp = 0, tn = 0;
    std::vector<RocPoint> roc;
    double auc = 0.0;
    // Leakage audit: ids and content hash of everything the training
    // stages saw. Not serialized to CSV.
    std::vector<std::string> train_ids;
    uint64_t train_input_hash = 0;
};

struct CvReport {
    std::vector<FoldReport> folds;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0; // population std over folds
    double mean_auc = 0.0;
    std::vector<RocPoint> mean_roc; // vertical average on a 101-point FPR grid
    std::string config_echo;
};

/// Wall-clock accounting per pipeline stage; absent stages produce no row.
class TimingCollector {
public:
    void record(const std::string& stage, double seconds);
    struct Row {
        std::string stage;
        uint64_t calls;
        double mean_ms;
    };
    std::vector<Row> rows() const;
    std::string to_csv() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::pair<uint64_t, double>> acc_; // calls, total seconds
};

enum class CvMode : uint8_t { VideoDescriptor, MajorityVote, GlobalPool };

/// Everything one cross-validated run needs. config_echo() reproduces the
/// run bit-identically together with the manifest.
struct CvConfig {
    DescriptorConfig desc;
    uint32_t codebook_size = 64;
    uint32_t kmedians_max_iter = 100;
    uint64_t sample_limit = 1000000;
    EncoderConfig encoder;
    AggFn agg_z = AggFn::Median;
    AggFn agg_t = AggFn::Median;
    KernelConfig kernel;
    double svm_tol = 1e-3;
    uint32_t svm_max_passes = 200;
    uint64_t root_seed = 7;
    bool shared_codebook = false;
    TieRule tie_rule = TieRule::Positive;
    uint32_t threads = 1;
    CvMode mode = CvMode::VideoDescriptor;

    std::string echo() const;
};

/// Descriptor sets of all unique keyframes plus, per manifest entry, the
/// indices of its frames.
struct FrameDescriptors {
    std::vector<std::string> paths;
    std::vector<DescriptorSet> frames;
    std::vector<std::vector<size_t>> per_video;
};

FrameDescriptors extract_frames(const std::vector<VideoManifestEntry>& manifest,
                                const std::filesystem::path& base_dir, const CvConfig& cfg,
                                TimingCollector* timing = nullptr);

/// k-fold cross-validation over the manifest. Strict protocol by default:
/// the codebook, gamma and SVM of fold f are functions of fold != f data
/// only.
CvReport run_cv(const std::vector<VideoManifestEntry>& manifest,
                const FrameDescriptors& table, const CvConfig& cfg,
                TimingCollector* timing = nullptr);

/// Convenience: extract from images under base_dir, then cross-validate.
CvReport run_cv(const std::vector<VideoManifestEntry>& manifest,
                const std::filesystem::path& base_dir, const CvConfig& cfg,
                TimingCollector* timing = nullptr);

enum class SweepAxis : uint8_t { Aggregation, CodebookSize, Encoder, DescriptorBits };

SweepAxis parse_sweep_axis(const std::string& name);

struct SweepRow {
    std::string value;
    CvReport report;
};

/// One cross-validated run per axis value. An empty value list yields an
/// empty table.
std::vector<SweepRow> sweep(const std::vector<VideoManifestEntry>& manifest,
                            const std::filesystem::path& base_dir, const CvConfig& base,
                            SweepAxis axis, const std::vector<std::string>& values,
                            TimingCollector* timing = nullptr);

std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Writes cv_report.csv, confusion.csv, roc_fold<k>.csv, roc_mean.csv and,
/// when timing is given, timing.csv into out_dir.
void write_cv_outputs(const CvReport& report, const std::filesystem::path& out_dir,
                      const TimingCollector* timing = nullptr);

} // namespace vidbossa
