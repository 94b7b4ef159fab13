// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/pipeline.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "vidbossa/hash.hpp"
#include "vidbossa/io_util.hpp"

namespace vidbossa {

namespace {

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "seed",        "manifest",     "videos_per_class", "frames_min",
        "frames_max",  "image_size",   "folds",            "class_gap",
        "bits",        "patch",        "step",             "smooth_radius",
        "M",           "max_iter",     "sample",           "encoder",
        "B",           "lambda_min",   "lambda_max",       "s",
        "knn",         "raw_counts",   "normalization",    "agg_z",
        "agg_t",       "tie_rule",     "metric",           "C",
        "gamma",       "svm_tol",      "max_passes",       "shared_codebook",
        "threads"};
    return keys;
}

size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::string suggest_key(const std::string& key) {
    std::string best;
    size_t best_d = 4; // suggest only within edit distance 3
    for (const auto& k : known_keys()) {
        const size_t d = edit_distance(key, k);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const uint64_t r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\": expected an unsigned integer, got \"" +
                          v + "\"");
    }
}

double parse_f64(const std::string& v, const std::string& key) {
    try {
        size_t used = 0;
        const double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key \"" + key + "\": expected a number, got \"" + v + "\"");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("config key \"" + key + "\": expected true or false, got \"" + v + "\"");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

RunConfig RunConfig::parse_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got \"" + stripped + "\"");
        }
        const std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        const size_t hash_pos = value.find(" #");
        if (hash_pos != std::string::npos && value.find('"') == std::string::npos) {
            value = trim(value.substr(0, hash_pos));
        }
        value = unquote(value);

        if (key == "seed") cfg.seed = parse_u64(value, key);
        else if (key == "manifest") cfg.manifest = value;
        else if (key == "videos_per_class") cfg.videos_per_class = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "frames_min") cfg.frames_min = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "frames_max") cfg.frames_max = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "image_size") cfg.image_size = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "folds") cfg.folds = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "class_gap") cfg.class_gap = parse_f64(value, key);
        else if (key == "bits") cfg.bits = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "patch") cfg.patch = static_cast<int>(parse_u64(value, key));
        else if (key == "step") cfg.step = static_cast<int>(parse_u64(value, key));
        else if (key == "smooth_radius") cfg.smooth_radius = static_cast<int>(parse_u64(value, key));
        else if (key == "M") cfg.codebook_size = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "max_iter") cfg.max_iter = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "sample") cfg.sample = parse_u64(value, key);
        else if (key == "encoder") cfg.encoder = value;
        else if (key == "B") cfg.bins = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "lambda_min") cfg.lambda_min = parse_f64(value, key);
        else if (key == "lambda_max") cfg.lambda_max = parse_f64(value, key);
        else if (key == "s") cfg.s = parse_f64(value, key);
        else if (key == "knn") cfg.knn = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "raw_counts") cfg.raw_counts = parse_bool(value, key);
        else if (key == "normalization") cfg.normalization = value;
        else if (key == "agg_z") cfg.agg_z = value;
        else if (key == "agg_t") cfg.agg_t = value;
        else if (key == "tie_rule") cfg.tie_rule = value;
        else if (key == "metric") cfg.metric = value;
        else if (key == "C") cfg.C = parse_f64(value, key);
        else if (key == "gamma") cfg.gamma = value;
        else if (key == "svm_tol") cfg.svm_tol = parse_f64(value, key);
        else if (key == "max_passes") cfg.max_passes = static_cast<uint32_t>(parse_u64(value, key));
        else if (key == "shared_codebook") cfg.shared_codebook = parse_bool(value, key);
        else if (key == "threads") cfg.threads = static_cast<uint32_t>(parse_u64(value, key));
        else {
            std::string msg = origin + ":" + std::to_string(lineno) + ": unknown config key \"" +
                              key + "\"";
            const std::string hint = suggest_key(key);
            if (!hint.empty()) msg += " (did you mean \"" + hint + "\"?)";
            throw ConfigError(msg);
        }
    }
    // Eager validation so bad values fail at parse time, not mid-pipeline.
    cfg.to_cv_config();
    if (cfg.manifest.empty()) cfg.to_corpus_spec().validate();
    return cfg;
}

RunConfig RunConfig::parse_file(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    return parse_text(std::string(bytes.begin(), bytes.end()), path.string());
}

std::string RunConfig::echo() const {
    std::ostringstream os;
    os << "B = " << bins << "\n";
    os << "C = " << fmt_double(C) << "\n";
    os << "M = " << codebook_size << "\n";
    os << "agg_t = " << agg_t << "\n";
    os << "agg_z = " << agg_z << "\n";
    os << "bits = " << bits << "\n";
    os << "class_gap = " << fmt_double(class_gap) << "\n";
    os << "encoder = " << encoder << "\n";
    os << "folds = " << folds << "\n";
    os << "frames_max = " << frames_max << "\n";
    os << "frames_min = " << frames_min << "\n";
    os << "gamma = " << gamma << "\n";
    os << "image_size = " << image_size << "\n";
    os << "knn = " << knn << "\n";
    os << "lambda_max = " << fmt_double(lambda_max) << "\n";
    os << "lambda_min = " << fmt_double(lambda_min) << "\n";
    os << "manifest = \"" << manifest << "\"\n";
    os << "max_iter = " << max_iter << "\n";
    os << "max_passes = " << max_passes << "\n";
    os << "metric = " << metric << "\n";
    os << "normalization = " << normalization << "\n";
    os << "patch = " << patch << "\n";
    os << "raw_counts = " << (raw_counts ? "true" : "false") << "\n";
    os << "s = " << fmt_double(s) << "\n";
    os << "sample = " << sample << "\n";
    os << "seed = " << seed << "\n";
    os << "shared_codebook = " << (shared_codebook ? "true" : "false") << "\n";
    os << "smooth_radius = " << smooth_radius << "\n";
    os << "step = " << step << "\n";
    os << "svm_tol = " << fmt_double(svm_tol) << "\n";
    os << "threads = " << threads << "\n";
    os << "tie_rule = " << tie_rule << "\n";
    os << "videos_per_class = " << videos_per_class << "\n";
    return os.str();
}

DescriptorConfig RunConfig::to_descriptor_config() const {
    DescriptorConfig d;
    d.bits = bits;
    d.patch = patch;
    d.step = step;
    d.seed = derive_seed(seed, "brief-pattern");
    d.smooth_radius = smooth_radius;
    return d;
}

CorpusSpec RunConfig::to_corpus_spec() const {
    CorpusSpec c;
    c.seed = derive_seed(seed, "synth");
    c.videos_per_class = videos_per_class;
    c.frames_min = frames_min;
    c.frames_max = frames_max;
    c.image_size = image_size;
    c.folds = folds;
    c.class_gap = class_gap;
    return c;
}

CvConfig RunConfig::to_cv_config(CvMode mode) const {
    CvConfig cv;
    cv.desc = to_descriptor_config();
    cv.codebook_size = codebook_size;
    cv.kmedians_max_iter = max_iter;
    cv.sample_limit = sample;
    if (encoder == "bow")
        cv.encoder.kind = Layout::BOW;
    else if (encoder == "bossanova")
        cv.encoder.kind = Layout::BOSSANOVA;
    else
        throw ConfigError("config key \"encoder\": expected bow or bossanova, got \"" + encoder +
                          "\"");
    cv.encoder.bossa.B = bins;
    cv.encoder.bossa.lambda_min = lambda_min;
    cv.encoder.bossa.lambda_max = lambda_max;
    cv.encoder.bossa.s = s;
    cv.encoder.bossa.knn = knn;
    cv.encoder.bossa.validate();
    if (cv.encoder.kind == Layout::BOSSANOVA && knn > codebook_size) {
        throw ConfigError("config key \"knn\": " + std::to_string(knn) +
                          " exceeds the codebook size M=" + std::to_string(codebook_size));
    }
    cv.encoder.normalize_counts = !raw_counts;
    if (normalization == "l2")
        cv.encoder.final_norm = NormMode::L2;
    else if (normalization == "none")
        cv.encoder.final_norm = NormMode::None;
    else
        throw ConfigError("config key \"normalization\": expected l2 or none, got \"" +
                          normalization + "\"");
    cv.agg_z = parse_agg_fn(agg_z);
    cv.agg_t = parse_agg_fn(agg_t);
    cv.kernel.metric = parse_metric(metric);
    if (gamma == "auto") {
        cv.kernel.gamma.reset();
    } else {
        const double g = parse_f64(gamma, "gamma");
        if (g <= 0.0) throw ConfigError("config key \"gamma\": must be auto or > 0");
        cv.kernel.gamma = g;
    }
    if (C <= 0.0) throw ConfigError("config key \"C\": must be > 0");
    cv.kernel.C = C;
    cv.svm_tol = svm_tol;
    cv.svm_max_passes = max_passes;
    cv.root_seed = seed;
    cv.shared_codebook = shared_codebook;
    if (tie_rule == "positive")
        cv.tie_rule = TieRule::Positive;
    else if (tie_rule == "negative")
        cv.tie_rule = TieRule::Negative;
    else
        throw ConfigError("config key \"tie_rule\": expected positive or negative, got \"" +
                          tie_rule + "\"");
    cv.threads = threads;
    cv.mode = mode;
    return cv;
}

namespace {

// A stage is skipped when its recorded input hash matches and all its
// outputs still exist. Hashes cover file contents, not timestamps, so
// copied trees stay cacheable.
class StageCache {
public:
    explicit StageCache(const std::filesystem::path& out_dir) : dir_(out_dir / ".stage") {
        std::filesystem::create_directories(dir_);
    }

    bool fresh(const std::string& stage, uint64_t input_hash,
               const std::vector<std::filesystem::path>& outputs) const {
        const std::filesystem::path stamp = dir_ / (stage + ".hash");
        if (!std::filesystem::exists(stamp)) return false;
        const std::vector<uint8_t> bytes = read_file_bytes(stamp);
        if (std::string(bytes.begin(), bytes.end()) != hash_hex(input_hash)) return false;
        for (const auto& p : outputs) {
            if (!std::filesystem::exists(p)) return false;
        }
        return true;
    }

    void stamp(const std::string& stage, uint64_t input_hash) const {
        write_file_text(dir_ / (stage + ".hash"), hash_hex(input_hash));
    }

private:
    std::filesystem::path dir_;
};

std::string frame_artifact_name(const std::string& keyframe_path) {
    std::string name = keyframe_path;
    std::replace(name.begin(), name.end(), '/', '_');
    std::replace(name.begin(), name.end(), '\\', '_');
    const size_t dot = name.rfind('.');
    if (dot != std::string::npos) name.resize(dot);
    return name + ".bdsc";
}

// Reraises with the failing stage named, preserving the error type so the
// CLI exit-code mapping still applies.
template <typename Fn>
void stage_guard(const char* stage, Fn&& fn) {
    const std::string prefix = std::string("stage ") + stage + " failed: ";
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const FormatError& e) {
        throw FormatError(prefix + e.what());
    } catch (const IoError& e) {
        throw IoError(prefix + e.what());
    } catch (const ContractViolation& e) {
        throw ContractViolation(prefix + e.what());
    } catch (const std::exception& e) {
        throw Error(prefix + e.what());
    }
}

} // namespace

PipelineResult run_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir,
                            std::ostream& log) {
    std::filesystem::create_directories(out_dir);
    write_file_text(out_dir / "resolved.toml", cfg.echo());
    const StageCache cache(out_dir);

    // --- synth ---------------------------------------------------------
    std::filesystem::path manifest_path;
    std::filesystem::path corpus_base;
    stage_guard("synth", [&] {
        if (cfg.manifest.empty()) {
            const CorpusSpec spec = cfg.to_corpus_spec();
            corpus_base = out_dir / "corpus";
            manifest_path = corpus_base / "manifest.jsonl";
            std::ostringstream key;
            key << "synth\n"
                << spec.seed << "\n"
                << spec.videos_per_class << "\n"
                << spec.frames_min << "\n"
                << spec.frames_max << "\n"
                << spec.image_size << "\n"
                << spec.folds << "\n"
                << fmt_double(spec.class_gap) << "\n";
            const uint64_t h = fnv1a64(key.str());
            if (cache.fresh("synth", h, {manifest_path})) {
                log << "[cached] synth\n";
            } else {
                log << "[run] synth\n";
                generate(spec, corpus_base);
                cache.stamp("synth", h);
            }
        } else {
            manifest_path = cfg.manifest;
            corpus_base = manifest_path.parent_path();
            log << "[skip] synth (external manifest)\n";
        }
    });

    const std::vector<VideoManifestEntry> manifest = read_manifest(manifest_path);

    // --- extract ---------------------------------------------------------
    const std::filesystem::path desc_dir = out_dir / "descriptors";
    std::vector<std::string> unique_frames;
    {
        std::set<std::string> seen;
        for (const auto& e : manifest) {
            for (const auto& kf : e.keyframes) {
                if (seen.insert(kf).second) unique_frames.push_back(kf);
            }
        }
    }
    const DescriptorConfig desc_cfg = cfg.to_descriptor_config();
    std::vector<std::filesystem::path> desc_files;
    for (const auto& kf : unique_frames) desc_files.push_back(desc_dir / frame_artifact_name(kf));

    stage_guard("extract", [&] {
        uint64_t extract_hash = fnv1a64("extract");
        extract_hash =
            fnv1a64(std::to_string(desc_cfg.bits) + ":" + std::to_string(desc_cfg.patch) + ":" +
                        std::to_string(desc_cfg.step) + ":" + std::to_string(desc_cfg.seed) +
                        ":" + std::to_string(desc_cfg.smooth_radius),
                    extract_hash);
        extract_hash ^= file_hash(manifest_path);
        extract_hash *= kFnvPrime;
        for (const auto& kf : unique_frames) {
            extract_hash ^= file_hash(corpus_base / kf);
            extract_hash *= kFnvPrime;
        }
        if (cache.fresh("extract", extract_hash, desc_files)) {
            log << "[cached] extract\n";
            return;
        }
        log << "[run] extract\n";
        std::filesystem::create_directories(desc_dir);
        const SamplingPattern pattern = gen_pattern(desc_cfg.seed, desc_cfg.bits, desc_cfg.patch);
        for (size_t i = 0; i < unique_frames.size(); ++i) {
            const GrayImage img = load_pgm(corpus_base / unique_frames[i]);
            DescriptorSet set = extract_frame(img, desc_cfg, pattern);
            set.source_id = unique_frames[i];
            write_descriptor_file(set, desc_files[i]);
        }
        cache.stamp("extract", extract_hash);
    });

    // --- evaluate --------------------------------------------------------
    const std::filesystem::path report_dir = out_dir / "report";
    const CvConfig cv_cfg = cfg.to_cv_config();
    const std::vector<std::filesystem::path> report_files = {
        report_dir / "cv_report.csv", report_dir / "confusion.csv", report_dir / "roc_mean.csv",
        report_dir / "timing.csv", report_dir / "config.toml"};

    PipelineResult result;
    result.manifest_path = manifest_path;
    result.report_dir = report_dir;

    stage_guard("evaluate", [&] {
        uint64_t eval_hash = fnv1a64("evaluate");
        eval_hash = fnv1a64(cv_cfg.echo(), eval_hash);
        eval_hash ^= file_hash(manifest_path);
        eval_hash *= kFnvPrime;
        for (const auto& f : desc_files) {
            eval_hash ^= file_hash(f);
            eval_hash *= kFnvPrime;
        }
        if (cache.fresh("evaluate", eval_hash, report_files)) {
            log << "[cached] evaluate\n";
            return;
        }
        log << "[run] evaluate\n";

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
        for (size_t i = 0; i < table.paths.size(); ++i) {
            table.frames[i] =
                read_descriptor_file(desc_dir / frame_artifact_name(table.paths[i]));
            table.frames[i].source_id = table.paths[i];
        }

        TimingCollector timing;
        result.report = run_cv(manifest, table, cv_cfg, &timing);
        write_cv_outputs(result.report, report_dir, &timing);
        cache.stamp("evaluate", eval_hash);
    });
    return result;
}

std::string describe_artifact(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const uint8_t* magic_bytes = r.take(4);
    const std::string magic(reinterpret_cast<const char*>(magic_bytes), 4);
    std::ostringstream os;
    if (magic == "BDSC") {
        const DescriptorSet set = read_descriptor_file(path);
        os << "BDSC v1, D=" << set.bits << " bits, N=" << set.count << " descriptors";
    } else if (magic == "BCBK") {
        const Codebook cb = read_codebook_file(path);
        os << "BCBK v1, M=" << cb.M << ", D=" << cb.D << " bits";
    } else if (magic == "BFVC") {
        const MidLevelVector v = read_feature_file(path);
        os << "BFVC v1, layout=" << (v.layout == Layout::BOW ? "bow" : "bossanova")
           << ", M=" << v.M << ", B=" << v.B << ", length=" << v.values.size();
        if (v.layout == Layout::BOSSANOVA) {
            os << " (= M*(B+1))";
        }
    } else if (magic == "BSVM") {
        const SvmModel m = read_model_file(path);
        os << "BSVM v1, metric=" << metric_name(m.metric) << ", gamma=" << m.gamma
           << ", C=" << m.C << ", support=" << m.support_vectors.size() << ", dim=" << m.dim();
    } else {
        throw FormatError(path.string() + ": unknown magic \"" + magic + "\"");
    }
    return os.str();
}

} // namespace vidbossa
