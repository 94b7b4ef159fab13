// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/video.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "vidbossa/kernels.hpp"

namespace vidbossa {

AggFn parse_agg_fn(const std::string& name) {
    if (name == "max") return AggFn::Max;
    if (name == "min") return AggFn::Min;
    if (name == "mean") return AggFn::Mean;
    if (name == "median") return AggFn::Median;
    throw ConfigError("unknown aggregation function \"" + name +
                      "\" (expected max, min, mean or median)");
}

const char* agg_fn_name(AggFn fn) {
    switch (fn) {
        case AggFn::Max: return "max";
        case AggFn::Min: return "min";
        case AggFn::Mean: return "mean";
        case AggFn::Median: return "median";
    }
    return "?";
}

namespace {

// Running min/max/sum over the coordinate slice [lo, hi); median collects
// per-coordinate columns and sorts them.
void aggregate_range(std::span<const MidLevelVector> frames, size_t lo, size_t hi, AggFn fn,
                     double* out) {
    const size_t n = frames.size();
    switch (fn) {
        case AggFn::Min:
        case AggFn::Max: {
            std::copy(frames[0].values.begin() + lo, frames[0].values.begin() + hi, out);
            for (size_t f = 1; f < n; ++f) {
                const double* x = frames[f].values.data() + lo;
                if (fn == AggFn::Min)
                    kern::min_inplace(out, x, hi - lo);
                else
                    kern::max_inplace(out, x, hi - lo);
            }
            return;
        }
        case AggFn::Mean: {
            std::copy(frames[0].values.begin() + lo, frames[0].values.begin() + hi, out);
            for (size_t f = 1; f < n; ++f) {
                kern::add_inplace(out, frames[f].values.data() + lo, hi - lo);
            }
            const double inv = 1.0 / static_cast<double>(n);
            for (size_t i = 0; i < hi - lo; ++i) out[i] *= inv;
            return;
        }
        case AggFn::Median: {
            std::vector<double> column(n);
            for (size_t i = lo; i < hi; ++i) {
                for (size_t f = 0; f < n; ++f) column[f] = frames[f].values[i];
                std::sort(column.begin(), column.end());
                out[i - lo] = (n % 2 == 1) ? column[n / 2]
                                           : 0.5 * (column[n / 2 - 1] + column[n / 2]);
            }
            return;
        }
    }
}

} // namespace

VideoDescriptor aggregate(std::span<const MidLevelVector> frames, AggFn agg_z, AggFn agg_t) {
    if (frames.empty()) {
        throw ContractViolation("aggregate: need at least one frame vector");
    }
    const MidLevelVector& first = frames[0];
    for (const auto& f : frames) {
        if (f.layout != first.layout || f.M != first.M || f.B != first.B ||
            f.values.size() != first.values.size()) {
            throw ContractViolation("aggregate: frame vectors disagree on layout/dimensions");
        }
    }

    VideoDescriptor vd;
    vd.layout = first.layout;
    vd.M = first.M;
    vd.B = first.B;
    vd.agg_z = agg_z;
    vd.agg_t = agg_t;
    vd.n_frames = static_cast<uint32_t>(frames.size());
    vd.values.assign(first.values.size(), 0.0);

    if (first.layout == Layout::BOSSANOVA) {
        const size_t hist_len = static_cast<size_t>(first.M) * first.B;
        aggregate_range(frames, 0, hist_len, agg_z, vd.values.data());
        aggregate_range(frames, hist_len, first.values.size(), agg_t,
                        vd.values.data() + hist_len);
    } else {
        aggregate_range(frames, 0, first.values.size(), agg_z, vd.values.data());
    }
    return vd;
}

int majority_vote(std::span<const int> frame_labels, TieRule tie_rule) {
    if (frame_labels.empty()) {
        throw ContractViolation("majority_vote: empty label sequence");
    }
    long pos = 0, neg = 0;
    for (int l : frame_labels) {
        if (l > 0)
            ++pos;
        else
            ++neg;
    }
    if (pos > neg) return 1;
    if (neg > pos) return -1;
    return tie_rule == TieRule::Positive ? 1 : -1;
}

MidLevelVector encode_frame(const DescriptorSet& set, const Codebook& cb,
                            const EncoderConfig& cfg) {
    MidLevelVector v = cfg.kind == Layout::BOW
                           ? encode_bow(set, cb)
                           : encode_bossanova(set, cb, cfg.bossa, cfg.normalize_counts);
    return normalize(v, cfg.final_norm);
}

MidLevelVector global_pool(std::span<const DescriptorSet> frames, const Codebook& cb,
                           const EncoderConfig& cfg) {
    DescriptorSet merged(cb.D, "global-pool");
    for (const auto& f : frames) {
        if (f.count == 0) continue;
        if (f.bits != cb.D) {
            throw ContractViolation("global_pool: descriptor set has " + std::to_string(f.bits) +
                                    " bits, codebook expects " + std::to_string(cb.D));
        }
        merged.words.insert(merged.words.end(), f.words.begin(), f.words.end());
        merged.count += f.count;
    }
    return encode_frame(merged, cb, cfg);
}

std::vector<VideoManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());

    std::vector<VideoManifestEntry> entries;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": invalid JSON: " + e.what());
        }
        VideoManifestEntry e;
        try {
            e.video_id = j.at("video_id").get<std::string>();
            e.label = j.at("label").get<int>();
            e.fold = j.at("fold").get<int>();
            e.keyframes = j.at("keyframes").get<std::vector<std::string>>();
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": missing or mistyped field: " + ex.what());
        }
        if (e.label != 1 && e.label != -1) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": label must be 1 or -1, got " + std::to_string(e.label));
        }
        if (e.fold < 0) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": fold must be >= 0");
        }
        if (e.keyframes.empty()) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": keyframes must be nonempty");
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

void write_manifest(const std::vector<VideoManifestEntry>& entries,
                    const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& e : entries) {
        nlohmann::json j;
        j["video_id"] = e.video_id;
        j["label"] = e.label;
        j["fold"] = e.fold;
        j["keyframes"] = e.keyframes;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace vidbossa
