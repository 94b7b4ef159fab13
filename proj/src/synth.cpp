// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace vidbossa {

void CorpusSpec::validate() const {
    if (frames_min < 1) throw ConfigError("CorpusSpec: frames_min must be >= 1");
    if (frames_max < frames_min) {
        throw ConfigError("CorpusSpec: frames_max must be >= frames_min");
    }
    if (folds < 2) throw ConfigError("CorpusSpec: need at least 2 folds");
    if (videos_per_class < folds) {
        throw ConfigError("CorpusSpec: need at least one video per class per fold "
                          "(videos_per_class >= folds)");
    }
    if (image_size < 16) throw ConfigError("CorpusSpec: image_size must be >= 16");
    if (!(class_gap > 0.0) || class_gap > 1.0) {
        throw ConfigError("CorpusSpec: class_gap must be in (0, 1]");
    }
}

TextureStyle TextureStyle::sample(int label, const CorpusSpec& spec, Rng& rng) {
    TextureStyle s;
    s.label_ = label;
    const int size = static_cast<int>(spec.image_size);
    if (label > 0) {
        const int grow = static_cast<int>(std::lround((1.0 - spec.class_gap) * 6.0));
        s.cell_size_ = 1 + grow + static_cast<int>(rng.next_below(2));
        s.smooth_radius_ = static_cast<int>(std::lround((1.0 - spec.class_gap) * 3.0));
        s.lo_ = 10 + static_cast<int>(rng.next_below(30));
        s.hi_ = 215 + static_cast<int>(rng.next_below(31));
    } else {
        // One shared gradient family (mostly horizontal) keeps the class
        // coherent in descriptor space; blobs and jitter add variety.
        s.base_ = 90 + static_cast<int>(rng.next_below(60));
        s.grad_x_ = 14 + static_cast<int>(rng.next_below(13));
        s.grad_y_ = static_cast<int>(rng.next_below(13)) - 6;
        s.n_blobs_ = 1 + static_cast<int>(rng.next_below(2));
        for (int i = 0; i < s.n_blobs_; ++i) {
            const int amp = 30 + static_cast<int>(rng.next_below(31));
            s.blob_amp_[i] = rng.next_below(2) == 0 ? amp : -amp;
            s.blob_r_[i] = size / 6 + static_cast<int>(rng.next_below(size / 12 + 1));
        }
    }
    return s;
}

GrayImage TextureStyle::render(uint32_t size, Rng& rng) const {
    const int n = static_cast<int>(size);
    GrayImage img(n, n);
    if (label_ > 0) {
        const int cell = cell_size_;
        const int cells = (n + cell - 1) / cell;
        std::vector<uint8_t> grid(static_cast<size_t>(cells) * cells);
        for (auto& g : grid) {
            g = rng.next_below(2) == 0 ? static_cast<uint8_t>(lo_) : static_cast<uint8_t>(hi_);
        }
        for (int y = 0; y < n; ++y) {
            for (int x = 0; x < n; ++x) {
                img.at(x, y) = grid[static_cast<size_t>(y / cell) * cells + (x / cell)];
            }
        }
        if (smooth_radius_ > 0) img = box_smooth(img, smooth_radius_);
        return img;
    }

    const int base = base_ - 8 + static_cast<int>(rng.next_below(17));
    int cx[3], cy[3];
    for (int i = 0; i < n_blobs_; ++i) {
        cx[i] = static_cast<int>(rng.next_below(size));
        cy[i] = static_cast<int>(rng.next_below(size));
    }
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            int64_t v = base + (static_cast<int64_t>(grad_x_) * x +
                                static_cast<int64_t>(grad_y_) * y) /
                                   64;
            for (int i = 0; i < n_blobs_; ++i) {
                const int64_t dx = x - cx[i];
                const int64_t dy = y - cy[i];
                const int64_t r2 = static_cast<int64_t>(blob_r_[i]) * blob_r_[i];
                const int64_t d2 = dx * dx + dy * dy;
                if (d2 < r2) v += blob_amp_[i] * (r2 - d2) / r2;
            }
            v += static_cast<int64_t>(rng.next_below(7)) - 3;
            img.at(x, y) = static_cast<uint8_t>(std::clamp<int64_t>(v, 0, 255));
        }
    }
    return img;
}

GeneratedCorpus generate(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    std::filesystem::create_directories(out_dir / "frames");

    Rng rng(spec.seed);
    GeneratedCorpus corpus;
    for (int label : {1, -1}) {
        for (uint32_t i = 0; i < spec.videos_per_class; ++i) {
            std::ostringstream id;
            id << (label > 0 ? "pos_" : "neg_") << std::setfill('0') << std::setw(3) << i;

            const TextureStyle style = TextureStyle::sample(label, spec, rng);
            const uint32_t n_frames =
                spec.frames_min +
                static_cast<uint32_t>(rng.next_below(spec.frames_max - spec.frames_min + 1));

            VideoManifestEntry entry;
            entry.video_id = id.str();
            entry.label = label;
            entry.fold = static_cast<int>(i % spec.folds);
            for (uint32_t f = 0; f < n_frames; ++f) {
                std::ostringstream name;
                name << "frames/" << entry.video_id << "_f" << std::setfill('0') << std::setw(3)
                     << f << ".pgm";
                write_pgm(style.render(spec.image_size, rng), out_dir / name.str());
                entry.keyframes.push_back(name.str());
            }
            corpus.entries.push_back(std::move(entry));
        }
    }
    corpus.manifest_path = out_dir / "manifest.jsonl";
    write_manifest(corpus.entries, corpus.manifest_path);
    return corpus;
}

std::vector<size_t> inject_minority_frames(std::vector<GrayImage>& frames, size_t k,
                                           const std::function<GrayImage()>& other_class_frame,
                                           Rng& rng) {
    if (k >= frames.size()) {
        throw ConfigError("inject_minority_frames: k=" + std::to_string(k) +
                          " must be less than the frame count " +
                          std::to_string(frames.size()));
    }
    std::vector<size_t> idx(frames.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + static_cast<size_t>(rng.next_below(idx.size() - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    for (size_t i : idx) frames[i] = other_class_frame();
    return idx;
}

} // namespace vidbossa
