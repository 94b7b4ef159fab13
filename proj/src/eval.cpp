// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "vidbossa/hash.hpp"
#include "vidbossa/image.hpp"
#include "vidbossa/io_util.hpp"
#include "vidbossa/parallel.hpp"
#include "vidbossa/rng.hpp"

namespace vidbossa {

std::vector<RocPoint> roc_curve(std::vector<ScoredLabel> scored) {
    size_t pos = 0, neg = 0;
    for (const auto& s : scored) (s.label > 0 ? pos : neg)++;
    if (pos == 0 || neg == 0) {
        throw ConfigError("roc_curve: need both positive and negative labels");
    }
    std::sort(scored.begin(), scored.end(),
              [](const ScoredLabel& a, const ScoredLabel& b) { return a.score > b.score; });

    std::vector<RocPoint> roc;
    roc.push_back({0.0, 0.0});
    size_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < scored.size()) {
        // One threshold step per distinct score value.
        const double v = scored[i].score;
        for (; i < scored.size() && scored[i].score == v; ++i) {
            (scored[i].label > 0 ? tp : fp)++;
        }
        roc.push_back({static_cast<double>(fp) / neg, static_cast<double>(tp) / pos});
    }
    return roc;
}

double auc(const std::vector<ScoredLabel>& scored) {
    const std::vector<RocPoint> roc = roc_curve(scored);
    double area = 0.0;
    for (size_t i = 1; i < roc.size(); ++i) {
        area += (roc[i].fpr - roc[i - 1].fpr) * 0.5 * (roc[i].tpr + roc[i - 1].tpr);
    }
    return area;
}

double roc_interpolate(const std::vector<RocPoint>& roc, double fpr) {
    // Points are nondecreasing in both coordinates; vertical segments share
    // an fpr, in which case the topmost tpr wins.
    double best_at_or_below = 0.0;
    for (size_t i = 0; i < roc.size(); ++i) {
        if (roc[i].fpr <= fpr) {
            best_at_or_below = std::max(best_at_or_below, roc[i].tpr);
            continue;
        }
        if (i == 0) return roc[0].tpr;
        const RocPoint& a = roc[i - 1];
        const RocPoint& b = roc[i];
        if (a.fpr == fpr || b.fpr == a.fpr) return best_at_or_below;
        const double t = (fpr - a.fpr) / (b.fpr - a.fpr);
        return std::max(best_at_or_below, a.tpr + t * (b.tpr - a.tpr));
    }
    return best_at_or_below;
}

void TimingCollector::record(const std::string& stage, double seconds) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& [calls, total] = acc_[stage];
    ++calls;
    total += seconds;
}

std::vector<TimingCollector::Row> TimingCollector::rows() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<Row> out;
    for (const auto& [stage, ct] : acc_) {
        out.push_back({stage, ct.first, 1000.0 * ct.second / static_cast<double>(ct.first)});
    }
    return out;
}

std::string TimingCollector::to_csv() const {
    std::ostringstream os;
    os << "stage,calls,mean_ms\n";
    for (const auto& row : rows()) {
        os << row.stage << "," << row.calls << "," << std::setprecision(6) << row.mean_ms
           << "\n";
    }
    return os.str();
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

class StageTimer {
public:
    StageTimer(TimingCollector* timing, std::string stage)
        : timing_(timing), stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now()) {}
    ~StageTimer() {
        if (timing_ != nullptr) {
            const auto end = std::chrono::steady_clock::now();
            timing_->record(stage_, std::chrono::duration<double>(end - start_).count());
        }
    }

private:
    TimingCollector* timing_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

std::string CvConfig::echo() const {
    std::ostringstream os;
    os << "B = " << encoder.bossa.B << "\n";
    os << "C = " << fmt_double(kernel.C) << "\n";
    os << "M = " << codebook_size << "\n";
    os << "agg_t = " << agg_fn_name(agg_t) << "\n";
    os << "agg_z = " << agg_fn_name(agg_z) << "\n";
    os << "bits = " << desc.bits << "\n";
    os << "encoder = " << (encoder.kind == Layout::BOW ? "bow" : "bossanova") << "\n";
    os << "gamma = " << (kernel.gamma ? fmt_double(*kernel.gamma) : std::string("auto")) << "\n";
    os << "knn = " << encoder.bossa.knn << "\n";
    os << "lambda_max = " << fmt_double(encoder.bossa.lambda_max) << "\n";
    os << "lambda_min = " << fmt_double(encoder.bossa.lambda_min) << "\n";
    os << "max_iter = " << kmedians_max_iter << "\n";
    os << "max_passes = " << svm_max_passes << "\n";
    os << "metric = " << metric_name(kernel.metric) << "\n";
    os << "mode = "
       << (mode == CvMode::VideoDescriptor
               ? "video-descriptor"
               : (mode == CvMode::MajorityVote ? "majority-vote" : "global-pool"))
       << "\n";
    os << "normalization = " << (encoder.final_norm == NormMode::L2 ? "l2" : "none") << "\n";
    os << "patch = " << desc.patch << "\n";
    os << "raw_counts = " << (encoder.normalize_counts ? "false" : "true") << "\n";
    os << "s = " << fmt_double(encoder.bossa.s) << "\n";
    os << "sample = " << sample_limit << "\n";
    os << "seed = " << root_seed << "\n";
    os << "shared_codebook = " << (shared_codebook ? "true" : "false") << "\n";
    os << "smooth_radius = " << desc.smooth_radius << "\n";
    os << "step = " << desc.step << "\n";
    os << "svm_tol = " << fmt_double(svm_tol) << "\n";
    os << "threads = " << threads << "\n";
    os << "tie_rule = " << (tie_rule == TieRule::Positive ? "positive" : "negative") << "\n";
    return os.str();
}

FrameDescriptors extract_frames(const std::vector<VideoManifestEntry>& manifest,
                                const std::filesystem::path& base_dir, const CvConfig& cfg,
                                TimingCollector* timing) {
    FrameDescriptors table;
    std::map<std::string, size_t> index;
    table.per_video.resize(manifest.size());
    for (size_t v = 0; v < manifest.size(); ++v) {
        for (const auto& kf : manifest[v].keyframes) {
            auto [it, inserted] = index.emplace(kf, table.paths.size());
            if (inserted) table.paths.push_back(kf);
            table.per_video[v].push_back(it->second);
        }
    }
    table.frames.resize(table.paths.size());
    const SamplingPattern pattern = gen_pattern(cfg.desc.seed, cfg.desc.bits, cfg.desc.patch);
    parallel_for(table.paths.size(), cfg.threads, [&](size_t i) {
        StageTimer t(timing, "extract_frame");
        const GrayImage img = load_pgm(base_dir / table.paths[i]);
        table.frames[i] = extract_frame(img, cfg.desc, pattern);
        table.frames[i].source_id = table.paths[i];
    });
    return table;
}

namespace {

Codebook train_codebook(const FrameDescriptors& table, const std::vector<size_t>& video_indices,
                        const CvConfig& cfg, const std::string& scope,
                        TimingCollector* timing) {
    StageTimer t(timing, "codebook");
    std::vector<DescriptorSet> sets;
    std::vector<bool> seen(table.frames.size(), false);
    for (size_t v : video_indices) {
        for (size_t fi : table.per_video[v]) {
            if (!seen[fi]) {
                seen[fi] = true;
                sets.push_back(table.frames[fi]);
            }
        }
    }
    const DescriptorSet pool =
        sample_pool(sets, cfg.sample_limit, derive_seed(cfg.root_seed, "codebook-sample:" + scope));
    KMediansResult res = kmedians(pool, cfg.codebook_size, cfg.kmedians_max_iter,
                                  derive_seed(cfg.root_seed, "codebook:" + scope));
    return std::move(res.codebook);
}

std::vector<MidLevelVector> encode_indices(const FrameDescriptors& table,
                                           const std::vector<size_t>& frame_indices,
                                           const Codebook& cb, const CvConfig& cfg,
                                           TimingCollector* timing) {
    std::vector<MidLevelVector> out(frame_indices.size());
    parallel_for(frame_indices.size(), cfg.threads, [&](size_t i) {
        StageTimer t(timing, "encode_frame");
        out[i] = encode_frame(table.frames[frame_indices[i]], cb, cfg.encoder);
    });
    return out;
}

struct FoldScores {
    std::vector<double> scores; // per test video, manifest order of test set
    std::vector<int> predicted;
};

FoldScores evaluate_fold_videos(const FrameDescriptors& table, const std::vector<size_t>& train,
                                const std::vector<size_t>& test,
                                const std::vector<VideoManifestEntry>& manifest,
                                const Codebook& cb, const CvConfig& cfg, uint64_t svm_seed,
                                TimingCollector* timing) {
    auto video_vector = [&](size_t v) -> std::vector<double> {
        if (cfg.mode == CvMode::GlobalPool) {
            std::vector<DescriptorSet> sets;
            for (size_t fi : table.per_video[v]) sets.push_back(table.frames[fi]);
            StageTimer t(timing, "aggregate_video");
            return global_pool(sets, cb, cfg.encoder).values;
        }
        const std::vector<MidLevelVector> frames =
            encode_indices(table, table.per_video[v], cb, cfg, timing);
        StageTimer t(timing, "aggregate_video");
        return aggregate(frames, cfg.agg_z, cfg.agg_t).values;
    };

    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (size_t v : train) {
        X.push_back(video_vector(v));
        y.push_back(manifest[v].label);
    }
    SvmModel model;
    {
        StageTimer t(timing, "svm_train");
        model = svm_train(X, y, cfg.kernel, cfg.svm_tol, cfg.svm_max_passes, svm_seed);
    }

    FoldScores out;
    for (size_t v : test) {
        StageTimer t(timing, "svm_predict");
        const double score = svm_decision(model, video_vector(v));
        out.scores.push_back(score);
        out.predicted.push_back(score >= 0.0 ? 1 : -1);
    }
    return out;
}

FoldScores evaluate_fold_voting(const FrameDescriptors& table, const std::vector<size_t>& train,
                                const std::vector<size_t>& test,
                                const std::vector<VideoManifestEntry>& manifest,
                                const Codebook& cb, const CvConfig& cfg, uint64_t svm_seed,
                                TimingCollector* timing) {
    // Frame-level SVM: every frame inherits its video's label.
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (size_t v : train) {
        for (const MidLevelVector& f :
             encode_indices(table, table.per_video[v], cb, cfg, timing)) {
            X.push_back(f.values);
            y.push_back(manifest[v].label);
        }
    }
    SvmModel model;
    {
        StageTimer t(timing, "svm_train");
        model = svm_train(X, y, cfg.kernel, cfg.svm_tol, cfg.svm_max_passes, svm_seed);
    }

    FoldScores out;
    for (size_t v : test) {
        const std::vector<MidLevelVector> frames =
            encode_indices(table, table.per_video[v], cb, cfg, timing);
        std::vector<int> frame_labels;
        double score_sum = 0.0;
        for (const auto& f : frames) {
            StageTimer t(timing, "svm_predict");
            const double s = svm_decision(model, f.values);
            frame_labels.push_back(s >= 0.0 ? 1 : -1);
            score_sum += s;
        }
        out.predicted.push_back(majority_vote(frame_labels, cfg.tie_rule));
        // The vote itself is discrete; the mean frame score stands in as
        // the continuous ranking value for the ROC.
        out.scores.push_back(score_sum / static_cast<double>(frames.size()));
    }
    return out;
}

} // namespace

namespace {

std::set<int> validate_fold_protocol(const std::vector<VideoManifestEntry>& manifest) {
    if (manifest.empty()) throw ConfigError("run_cv: empty manifest");
    std::set<int> fold_ids;
    for (const auto& e : manifest) fold_ids.insert(e.fold);
    if (fold_ids.size() < 2) {
        throw ConfigError("run_cv: manifest must cover at least 2 folds, found " +
                          std::to_string(fold_ids.size()));
    }
    for (int f : fold_ids) {
        bool pos = false, neg = false;
        for (const auto& e : manifest) {
            if (e.fold != f) (e.label > 0 ? pos : neg) = true;
        }
        if (!pos || !neg) {
            throw ConfigError("run_cv: training split of fold " + std::to_string(f) +
                              " contains a single class");
        }
    }
    return fold_ids;
}

} // namespace

CvReport run_cv(const std::vector<VideoManifestEntry>& manifest,
                const std::filesystem::path& base_dir, const CvConfig& cfg,
                TimingCollector* timing) {
    validate_fold_protocol(manifest);
    const FrameDescriptors table = extract_frames(manifest, base_dir, cfg, timing);
    return run_cv(manifest, table, cfg, timing);
}

CvReport run_cv(const std::vector<VideoManifestEntry>& manifest, const FrameDescriptors& table,
                const CvConfig& cfg, TimingCollector* timing) {
    const std::set<int> fold_ids = validate_fold_protocol(manifest);

    std::vector<size_t> all_videos(manifest.size());
    for (size_t v = 0; v < manifest.size(); ++v) all_videos[v] = v;
    Codebook shared_cb;
    if (cfg.shared_codebook) {
        shared_cb = train_codebook(table, all_videos, cfg, "shared", timing);
    }

    CvReport report;
    report.config_echo = cfg.echo();
    for (int f : fold_ids) {
        std::vector<size_t> train, test;
        for (size_t v = 0; v < manifest.size(); ++v) {
            (manifest[v].fold == f ? test : train).push_back(v);
        }

        const Codebook cb =
            cfg.shared_codebook
                ? shared_cb
                : train_codebook(table, train, cfg, "fold" + std::to_string(f), timing);

        const uint64_t svm_seed = derive_seed(cfg.root_seed, "svm:fold" + std::to_string(f));
        const FoldScores fs =
            cfg.mode == CvMode::MajorityVote
                ? evaluate_fold_voting(table, train, test, manifest, cb, cfg, svm_seed, timing)
                : evaluate_fold_videos(table, train, test, manifest, cb, cfg, svm_seed, timing);

        FoldReport fr;
        fr.fold = f;
        std::vector<ScoredLabel> scored;
        for (size_t i = 0; i < test.size(); ++i) {
            const int truth = manifest[test[i]].label;
            const int pred = fs.predicted[i];
            if (truth > 0 && pred > 0) fr.tp++;
            if (truth > 0 && pred < 0) fr.fn++;
            if (truth < 0 && pred > 0) fr.fp++;
            if (truth < 0 && pred < 0) fr.tn++;
            scored.push_back({fs.scores[i], truth});
        }
        fr.accuracy = static_cast<double>(fr.tp + fr.tn) / static_cast<double>(test.size());
        fr.roc = roc_curve(scored);
        fr.auc = auc(scored);

        for (size_t v : train) fr.train_ids.push_back(manifest[v].video_id);
        std::sort(fr.train_ids.begin(), fr.train_ids.end());
        uint64_t h = fnv1a64(report.config_echo);
        for (const auto& id : fr.train_ids) h = fnv1a64(id, h);
        fr.train_input_hash = h;

        report.folds.push_back(std::move(fr));
    }

    double acc_sum = 0.0, auc_sum = 0.0;
    for (const auto& fr : report.folds) {
        acc_sum += fr.accuracy;
        auc_sum += fr.auc;
    }
    const double n = static_cast<double>(report.folds.size());
    report.mean_accuracy = acc_sum / n;
    report.mean_auc = auc_sum / n;
    double var = 0.0;
    for (const auto& fr : report.folds) {
        const double d = fr.accuracy - report.mean_accuracy;
        var += d * d;
    }
    report.std_accuracy = std::sqrt(var / n);

    report.mean_roc.reserve(101);
    for (int i = 0; i <= 100; ++i) {
        const double g = static_cast<double>(i) / 100.0;
        double tpr = 0.0;
        for (const auto& fr : report.folds) tpr += roc_interpolate(fr.roc, g);
        report.mean_roc.push_back({g, tpr / n});
    }
    return report;
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "aggregation") return SweepAxis::Aggregation;
    if (name == "codebook_size") return SweepAxis::CodebookSize;
    if (name == "encoder") return SweepAxis::Encoder;
    if (name == "descriptor_bits") return SweepAxis::DescriptorBits;
    throw ConfigError("unknown sweep axis \"" + name +
                      "\" (expected aggregation, codebook_size, encoder or descriptor_bits)");
}

std::vector<SweepRow> sweep(const std::vector<VideoManifestEntry>& manifest,
                            const std::filesystem::path& base_dir, const CvConfig& base,
                            SweepAxis axis, const std::vector<std::string>& values,
                            TimingCollector* timing) {
    std::vector<SweepRow> rows;
    for (const std::string& value : values) {
        CvConfig cfg = base;
        switch (axis) {
            case SweepAxis::Aggregation:
                cfg.agg_z = parse_agg_fn(value);
                cfg.agg_t = cfg.agg_z;
                break;
            case SweepAxis::CodebookSize:
                cfg.codebook_size = static_cast<uint32_t>(std::stoul(value));
                break;
            case SweepAxis::Encoder:
                if (value == "bow")
                    cfg.encoder.kind = Layout::BOW;
                else if (value == "bossanova")
                    cfg.encoder.kind = Layout::BOSSANOVA;
                else
                    throw ConfigError("sweep: unknown encoder \"" + value + "\"");
                break;
            case SweepAxis::DescriptorBits:
                cfg.desc.bits = static_cast<uint32_t>(std::stoul(value));
                break;
        }
        rows.push_back({value, run_cv(manifest, base_dir, cfg, timing)});
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "value,mean_accuracy,std_accuracy,mean_auc,config\n";
    for (const auto& row : rows) {
        std::string echo = row.report.config_echo;
        std::replace(echo.begin(), echo.end(), '\n', ';');
        os << row.value << "," << std::setprecision(10) << row.report.mean_accuracy << ","
           << row.report.std_accuracy << "," << row.report.mean_auc << ",\"" << echo << "\"\n";
    }
    return os.str();
}

void write_cv_outputs(const CvReport& report, const std::filesystem::path& out_dir,
                      const TimingCollector* timing) {
    std::filesystem::create_directories(out_dir);

    std::ostringstream cv;
    cv << std::setprecision(10) << "fold,accuracy,auc\n";
    for (const auto& fr : report.folds) {
        cv << fr.fold << "," << fr.accuracy << "," << fr.auc << "\n";
    }
    cv << "mean," << report.mean_accuracy << "," << report.mean_auc << "\n";
    cv << "std," << report.std_accuracy << ",\n";
    write_file_text(out_dir / "cv_report.csv", cv.str());

    std::ostringstream conf;
    conf << "fold,tp,fn,fp,tn\n";
    uint64_t tp = 0, fn_ = 0, fp = 0, tn = 0;
    for (const auto& fr : report.folds) {
        conf << fr.fold << "," << fr.tp << "," << fr.fn << "," << fr.fp << "," << fr.tn << "\n";
        tp += fr.tp;
        fn_ += fr.fn;
        fp += fr.fp;
        tn += fr.tn;
    }
    conf << "total," << tp << "," << fn_ << "," << fp << "," << tn << "\n";
    write_file_text(out_dir / "confusion.csv", conf.str());

    for (const auto& fr : report.folds) {
        std::ostringstream roc;
        roc << std::setprecision(10) << "fpr,tpr\n";
        for (const auto& p : fr.roc) roc << p.fpr << "," << p.tpr << "\n";
        write_file_text(out_dir / ("roc_fold" + std::to_string(fr.fold) + ".csv"), roc.str());
    }
    std::ostringstream mroc;
    mroc << std::setprecision(10) << "fpr,tpr\n";
    for (const auto& p : report.mean_roc) mroc << p.fpr << "," << p.tpr << "\n";
    write_file_text(out_dir / "roc_mean.csv", mroc.str());

    write_file_text(out_dir / "config.toml", report.config_echo);
    if (timing != nullptr) {
        write_file_text(out_dir / "timing.csv", timing->to_csv());
    }
}

} // namespace vidbossa
