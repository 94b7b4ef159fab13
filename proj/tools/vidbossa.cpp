// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
//
// Single executable wiring the whole pipeline:
//   synth -> extract -> codebook -> encode -> aggregate -> train -> evaluate
// plus the voting / global-pooling baselines, sweeps and artifact inspection.

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "vidbossa/hash.hpp"
#include "vidbossa/io_util.hpp"
#include "vidbossa/kernels.hpp"
#include "vidbossa/pipeline.hpp"

namespace fs = std::filesystem;
using namespace vidbossa;

namespace {

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
    if (!fs::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ext) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string artifact_stem(const std::string& keyframe_path) {
    std::string name = keyframe_path;
    std::replace(name.begin(), name.end(), '/', '_');
    std::replace(name.begin(), name.end(), '\\', '_');
    const size_t dot = name.rfind('.');
    if (dot != std::string::npos) name.resize(dot);
    return name;
}

void parse_frames_range(const std::string& spec, uint32_t& lo, uint32_t& hi) {
    const size_t dots = spec.find("..");
    try {
        if (dots == std::string::npos) {
            lo = hi = static_cast<uint32_t>(std::stoul(spec));
        } else {
            lo = static_cast<uint32_t>(std::stoul(spec.substr(0, dots)));
            hi = static_cast<uint32_t>(std::stoul(spec.substr(dots + 2)));
        }
    } catch (const std::exception&) {
        throw ConfigError("--frames: expected N or MIN..MAX, got \"" + spec + "\"");
    }
}

EncoderConfig make_encoder_config(const std::string& encoder, uint32_t B, double lmin,
                                  double lmax, double s, uint32_t knn, bool raw_counts,
                                  const std::string& norm) {
    EncoderConfig cfg;
    if (encoder == "bow")
        cfg.kind = Layout::BOW;
    else if (encoder == "bossanova")
        cfg.kind = Layout::BOSSANOVA;
    else
        throw ConfigError("--encoder: expected bow or bossanova, got \"" + encoder + "\"");
    cfg.bossa.B = B;
    cfg.bossa.lambda_min = lmin;
    cfg.bossa.lambda_max = lmax;
    cfg.bossa.s = s;
    cfg.bossa.knn = knn;
    cfg.bossa.validate();
    cfg.normalize_counts = !raw_counts;
    if (norm == "l2")
        cfg.final_norm = NormMode::L2;
    else if (norm == "none")
        cfg.final_norm = NormMode::None;
    else
        throw ConfigError("--norm: expected l2 or none, got \"" + norm + "\"");
    return cfg;
}

int cmd_synth(uint64_t seed, uint32_t vpc, const std::string& frames, uint32_t size,
              uint32_t folds, double gap, const std::string& out) {
    CorpusSpec spec;
    spec.seed = seed;
    spec.videos_per_class = vpc;
    parse_frames_range(frames, spec.frames_min, spec.frames_max);
    spec.image_size = size;
    spec.folds = folds;
    spec.class_gap = gap;
    const GeneratedCorpus corpus = generate(spec, out);
    std::cout << "wrote " << corpus.entries.size() << " videos, manifest at "
              << corpus.manifest_path.string() << "\n";
    return 0;
}

int cmd_extract(const std::string& input, const std::string& out, uint32_t bits, int patch,
                int step, uint64_t seed, int smooth, uint32_t threads) {
    DescriptorConfig cfg{bits, patch, step, seed, smooth};
    fs::create_directories(out);
    const fs::path in_path(input);
    if (in_path.extension() == ".jsonl") {
        const auto manifest = read_manifest(in_path);
        const fs::path base = in_path.parent_path();
        CvConfig cv;
        cv.desc = cfg;
        cv.threads = threads;
        const FrameDescriptors table = extract_frames(manifest, base, cv, nullptr);
        for (size_t i = 0; i < table.paths.size(); ++i) {
            write_descriptor_file(table.frames[i],
                                  fs::path(out) / (artifact_stem(table.paths[i]) + ".bdsc"));
        }
        std::cout << "extracted " << table.frames.size() << " frames\n";
    } else {
        const GrayImage img = load_pgm(in_path);
        DescriptorSet set = extract_frame(img, cfg);
        set.source_id = input;
        const fs::path dest = fs::path(out) / (in_path.stem().string() + ".bdsc");
        write_descriptor_file(set, dest);
        std::cout << "wrote " << dest.string() << " (N=" << set.count << ")\n";
    }
    return 0;
}

int cmd_codebook(const std::string& desc_dir, uint32_t M, uint64_t seed, uint32_t max_iter,
                 uint64_t sample, const std::string& out) {
    std::vector<DescriptorSet> sets;
    for (const auto& f : list_files(desc_dir, ".bdsc")) {
        sets.push_back(read_descriptor_file(f));
    }
    if (sets.empty()) throw ConfigError("codebook: no .bdsc files under " + desc_dir);
    const DescriptorSet pool = sample_pool(sets, sample, Rng::splitmix64(seed));
    KMediansResult res = kmedians(pool, M, max_iter, seed);
    write_codebook_file(res.codebook, out);
    std::cout << "codebook M=" << M << " D=" << res.codebook.D << " trained on " << pool.count
              << " descriptors, " << res.iterations << " iterations"
              << (res.converged ? " (converged)" : "") << " -> " << out << "\n";
    return 0;
}

int cmd_encode(const std::string& cb_path, const std::string& desc_dir,
               const std::string& encoder, uint32_t B, double lmin, double lmax, double s,
               uint32_t knn, bool raw_counts, const std::string& norm, const std::string& out) {
    const Codebook cb = read_codebook_file(cb_path);
    const EncoderConfig cfg = make_encoder_config(encoder, B, lmin, lmax, s, knn, raw_counts, norm);
    fs::create_directories(out);
    size_t n = 0;
    for (const auto& f : list_files(desc_dir, ".bdsc")) {
        const DescriptorSet set = read_descriptor_file(f);
        const MidLevelVector v = encode_frame(set, cb, cfg);
        write_feature_file(v, fs::path(out) / (f.stem().string() + ".bfvc"));
        ++n;
    }
    std::cout << "encoded " << n << " frames\n";
    return 0;
}

int cmd_aggregate(const std::string& feat_dir, const std::string& manifest_path,
                  const std::string& agg_z, const std::string& agg_t, const std::string& out) {
    const auto manifest = read_manifest(manifest_path);
    const AggFn fz = parse_agg_fn(agg_z);
    const AggFn ft = parse_agg_fn(agg_t);
    fs::create_directories(out);
    for (const auto& e : manifest) {
        std::vector<MidLevelVector> frames;
        for (const auto& kf : e.keyframes) {
            frames.push_back(
                read_feature_file(fs::path(feat_dir) / (artifact_stem(kf) + ".bfvc")));
        }
        const VideoDescriptor vd = aggregate(frames, fz, ft);
        MidLevelVector v;
        v.layout = vd.layout;
        v.M = vd.M;
        v.B = vd.B;
        v.values = vd.values;
        write_feature_file(v, fs::path(out) / (e.video_id + ".bfvc"));
    }
    std::cout << "aggregated " << manifest.size() << " videos\n";
    return 0;
}

int cmd_train(const std::string& feat_dir, const std::string& manifest_path, int fold_holdout,
              double C, const std::string& metric, const std::string& gamma, double tol,
              uint32_t max_passes, uint64_t seed, const std::string& out) {
    const auto manifest = read_manifest(manifest_path);
    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (const auto& e : manifest) {
        if (e.fold == fold_holdout) continue;
        X.push_back(read_feature_file(fs::path(feat_dir) / (e.video_id + ".bfvc")).values);
        y.push_back(e.label);
    }
    if (X.empty()) throw ConfigError("train: no training videos outside fold " +
                                     std::to_string(fold_holdout));
    KernelConfig kc;
    kc.metric = parse_metric(metric);
    kc.C = C;
    if (gamma != "auto") kc.gamma = std::stod(gamma);
    const SvmModel model = svm_train(X, y, kc, tol, max_passes, seed);
    write_model_file(model, out);
    std::cout << "trained on " << X.size() << " videos, " << model.support_vectors.size()
              << " support vectors, gamma=" << model.gamma << " -> " << out << "\n";
    return 0;
}

int cmd_predict(const std::string& model_path, const std::string& feat_dir,
                const std::string& out) {
    const SvmModel model = read_model_file(model_path);
    std::ostringstream csv;
    csv << std::setprecision(10) << "id,score,label\n";
    for (const auto& f : list_files(feat_dir, ".bfvc")) {
        const MidLevelVector v = read_feature_file(f);
        const double score = svm_decision(model, v.values);
        csv << f.stem().string() << "," << score << "," << (score >= 0.0 ? 1 : -1) << "\n";
    }
    write_file_text(out, csv.str());
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& manifest_path, const std::string& config_path,
                 const std::string& out, CvMode mode, uint32_t threads_override) {
    RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::parse_file(config_path);
    CvConfig cfg = rc.to_cv_config(mode);
    if (threads_override > 0) cfg.threads = threads_override;
    const auto manifest = read_manifest(manifest_path);
    TimingCollector timing;
    const CvReport report =
        run_cv(manifest, fs::path(manifest_path).parent_path(), cfg, &timing);
    write_cv_outputs(report, out, &timing);
    std::cout << std::setprecision(4) << "mean accuracy " << report.mean_accuracy << " +- "
              << report.std_accuracy << ", mean AUC " << report.mean_auc << " -> " << out
              << "\n";
    return 0;
}

int cmd_sweep(const std::string& manifest_path, const std::string& config_path,
              const std::string& axis, const std::vector<std::string>& values,
              const std::string& out) {
    RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::parse_file(config_path);
    const CvConfig base = rc.to_cv_config();
    const auto manifest = read_manifest(manifest_path);
    const auto rows = sweep(manifest, fs::path(manifest_path).parent_path(), base,
                            parse_sweep_axis(axis), values);
    write_file_text(out, sweep_to_csv(rows));
    std::cout << "wrote " << rows.size() << " rows -> " << out << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out) {
    const RunConfig cfg = RunConfig::parse_file(config_path);
    const PipelineResult result = run_pipeline(cfg, out, std::cout);
    const fs::path report_csv = result.report_dir / "cv_report.csv";
    if (fs::exists(report_csv)) {
        std::cout << "report at " << report_csv.string() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"binary-descriptor video classification pipeline (BoW / BossaNova, "
                 "BNVD / BoW-VD video descriptors, kernel SVM)"};
    app.require_subcommand(1);

    uint32_t threads = 0;
    app.add_option("--threads", threads,
                   "worker thread cap (0 = VIDBOSSA_THREADS env or 1); results do not "
                   "depend on it");

    // synth
    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic two-class corpus");
    uint64_t sy_seed = 7;
    uint32_t sy_vpc = 20, sy_size = 128, sy_folds = 5;
    std::string sy_frames = "5..12", sy_out = "corpus";
    double sy_gap = 1.0;
    sc_synth->add_option("--seed", sy_seed);
    sc_synth->add_option("--videos-per-class", sy_vpc);
    sc_synth->add_option("--frames", sy_frames, "frame count or MIN..MAX range");
    sc_synth->add_option("--size", sy_size);
    sc_synth->add_option("--folds", sy_folds);
    sc_synth->add_option("--gap", sy_gap, "class separation in (0,1]");
    sc_synth->add_option("--out", sy_out)->required();

    // extract
    auto* sc_extract = app.add_subcommand("extract", "extract BRIEF descriptors");
    std::string ex_input, ex_out;
    uint32_t ex_bits = 256;
    int ex_patch = 16, ex_step = 6, ex_smooth = 2;
    uint64_t ex_seed = 42;
    sc_extract->add_option("--input", ex_input, "manifest (.jsonl) or a single .pgm image")
        ->required();
    sc_extract->add_option("--out", ex_out)->required();
    sc_extract->add_option("--bits", ex_bits);
    sc_extract->add_option("--patch", ex_patch);
    sc_extract->add_option("--step", ex_step);
    sc_extract->add_option("--seed", ex_seed);
    sc_extract->add_option("--smooth", ex_smooth);

    // codebook
    auto* sc_codebook = app.add_subcommand("codebook", "learn a k-medians codebook");
    std::string cb_desc, cb_out = "cb.bcbk";
    uint32_t cb_M = 256, cb_max_iter = 100;
    uint64_t cb_seed = 42, cb_sample = 1000000;
    sc_codebook->add_option("--descriptors", cb_desc)->required();
    sc_codebook->add_option("--M", cb_M);
    sc_codebook->add_option("--seed", cb_seed);
    sc_codebook->add_option("--max-iter", cb_max_iter);
    sc_codebook->add_option("--sample", cb_sample);
    sc_codebook->add_option("--out", cb_out)->required();

    // encode
    auto* sc_encode = app.add_subcommand("encode", "encode descriptor sets to mid-level vectors");
    std::string en_cb, en_desc, en_out, en_encoder = "bossanova", en_norm = "l2";
    uint32_t en_B = 10, en_knn = 10;
    double en_lmin = 0.0, en_lmax = 3.0, en_s = 1e-3;
    bool en_raw = false;
    sc_encode->add_option("--codebook", en_cb)->required();
    sc_encode->add_option("--descriptors", en_desc)->required();
    sc_encode->add_option("--encoder", en_encoder, "bow or bossanova");
    sc_encode->add_option("--B", en_B);
    sc_encode->add_option("--lmin", en_lmin);
    sc_encode->add_option("--lmax", en_lmax);
    sc_encode->add_option("--s", en_s);
    sc_encode->add_option("--knn", en_knn);
    sc_encode->add_flag("--raw-counts", en_raw, "keep raw histogram counts");
    sc_encode->add_option("--norm", en_norm, "final normalization: l2 or none");
    sc_encode->add_option("--out", en_out)->required();

    // aggregate
    auto* sc_aggregate = app.add_subcommand("aggregate", "aggregate frame vectors per video");
    std::string ag_feat, ag_manifest, ag_out, ag_z = "median", ag_t = "median";
    sc_aggregate->add_option("--features", ag_feat)->required();
    sc_aggregate->add_option("--manifest", ag_manifest)->required();
    sc_aggregate->add_option("--agg-z", ag_z);
    sc_aggregate->add_option("--agg-t", ag_t);
    sc_aggregate->add_option("--out", ag_out)->required();

    // train
    auto* sc_train = app.add_subcommand("train", "train the video-level SVM");
    std::string tr_feat, tr_manifest, tr_metric = "l2", tr_gamma = "auto", tr_out = "model.bsvm";
    int tr_fold = 0;
    double tr_C = 10.0, tr_tol = 1e-3;
    uint32_t tr_passes = 200;
    uint64_t tr_seed = 1;
    sc_train->add_option("--features", tr_feat)->required();
    sc_train->add_option("--manifest", tr_manifest)->required();
    sc_train->add_option("--fold-holdout", tr_fold);
    sc_train->add_option("--C", tr_C);
    sc_train->add_option("--metric", tr_metric);
    sc_train->add_option("--gamma", tr_gamma, "auto or a positive number");
    sc_train->add_option("--tol", tr_tol);
    sc_train->add_option("--max-passes", tr_passes);
    sc_train->add_option("--seed", tr_seed);
    sc_train->add_option("--out", tr_out)->required();

    // predict
    auto* sc_predict = app.add_subcommand("predict", "score feature files with a model");
    std::string pr_model, pr_feat, pr_out = "scores.csv";
    sc_predict->add_option("--model", pr_model)->required();
    sc_predict->add_option("--features", pr_feat)->required();
    sc_predict->add_option("--out", pr_out)->required();

    // evaluate / baselines
    auto* sc_evaluate = app.add_subcommand("evaluate", "cross-validated evaluation");
    std::string ev_manifest, ev_config, ev_out = "report";
    sc_evaluate->add_option("--manifest", ev_manifest)->required();
    sc_evaluate->add_option("--config", ev_config, "run config (defaults when omitted)");
    sc_evaluate->add_option("--out", ev_out)->required();

    auto* sc_vote = app.add_subcommand("baseline-vote",
                                       "majority-voting baseline (frame-level SVM)");
    std::string bv_manifest, bv_config, bv_out = "report-vote";
    sc_vote->add_option("--manifest", bv_manifest)->required();
    sc_vote->add_option("--config", bv_config);
    sc_vote->add_option("--out", bv_out)->required();

    auto* sc_global = app.add_subcommand("baseline-global",
                                         "global-pooling baseline (one vector per video)");
    std::string bg_manifest, bg_config, bg_out = "report-global";
    sc_global->add_option("--manifest", bg_manifest)->required();
    sc_global->add_option("--config", bg_config);
    sc_global->add_option("--out", bg_out)->required();

    // sweep
    auto* sc_sweep = app.add_subcommand("sweep", "parameter sweep of cross-validated runs");
    std::string sw_manifest, sw_config, sw_axis, sw_out = "sweep.csv";
    std::vector<std::string> sw_values;
    sc_sweep->add_option("--manifest", sw_manifest)->required();
    sc_sweep->add_option("--config", sw_config);
    sc_sweep
        ->add_option("--axis", sw_axis,
                     "aggregation | codebook_size | encoder | descriptor_bits")
        ->required();
    sc_sweep->add_option("--values", sw_values)->delimiter(',');
    sc_sweep->add_option("--out", sw_out)->required();

    // describe
    auto* sc_describe = app.add_subcommand("describe", "print an artifact's header summary");
    std::string de_path;
    sc_describe->add_option("path", de_path)->required();

    // run
    auto* sc_run = app.add_subcommand("run", "full pipeline from a config file");
    std::string ru_config, ru_out = "out";
    sc_run->add_option("--config", ru_config)->required();
    sc_run->add_option("--out", ru_out)->required();

    // kernels (diagnostic)
    auto* sc_kernels = app.add_subcommand("kernels", "show the active SIMD backend");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sc_synth)
            return cmd_synth(sy_seed, sy_vpc, sy_frames, sy_size, sy_folds, sy_gap, sy_out);
        if (*sc_extract)
            return cmd_extract(ex_input, ex_out, ex_bits, ex_patch, ex_step, ex_seed, ex_smooth,
                               threads);
        if (*sc_codebook)
            return cmd_codebook(cb_desc, cb_M, cb_seed, cb_max_iter, cb_sample, cb_out);
        if (*sc_encode)
            return cmd_encode(en_cb, en_desc, en_encoder, en_B, en_lmin, en_lmax, en_s, en_knn,
                              en_raw, en_norm, en_out);
        if (*sc_aggregate) return cmd_aggregate(ag_feat, ag_manifest, ag_z, ag_t, ag_out);
        if (*sc_train)
            return cmd_train(tr_feat, tr_manifest, tr_fold, tr_C, tr_metric, tr_gamma, tr_tol,
                             tr_passes, tr_seed, tr_out);
        if (*sc_predict) return cmd_predict(pr_model, pr_feat, pr_out);
        if (*sc_evaluate)
            return cmd_evaluate(ev_manifest, ev_config, ev_out, CvMode::VideoDescriptor, threads);
        if (*sc_vote)
            return cmd_evaluate(bv_manifest, bv_config, bv_out, CvMode::MajorityVote, threads);
        if (*sc_global)
            return cmd_evaluate(bg_manifest, bg_config, bg_out, CvMode::GlobalPool, threads);
        if (*sc_sweep) return cmd_sweep(sw_manifest, sw_config, sw_axis, sw_values, sw_out);
        if (*sc_describe) {
            std::cout << describe_artifact(de_path) << "\n";
            return 0;
        }
        if (*sc_run) return cmd_run(ru_config, ru_out);
        if (*sc_kernels) {
            std::cout << kern::backend_name(kern::active_backend()) << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
