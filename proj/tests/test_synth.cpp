// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "vidbossa/codebook.hpp"
#include "vidbossa/encoding.hpp"
#include "vidbossa/hash.hpp"
#include "vidbossa/synth.hpp"
#include "test_util.hpp"

using namespace vidbossa;

namespace {

uint64_t tree_hash(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    uint64_t h = kFnvOffset;
    for (const auto& f : files) {
        h = fnv1a64(f.lexically_relative(root).generic_string(), h);
        h ^= file_hash(f);
        h *= kFnvPrime;
    }
    return h;
}

} // namespace

TEST_CASE("corpus generation is deterministic") {
    TempDir a("synth_a"), b("synth_b");
    CorpusSpec spec;
    spec.seed = 7;
    spec.videos_per_class = 4;
    spec.frames_min = 2;
    spec.frames_max = 4;
    spec.image_size = 48;
    spec.folds = 2;
    generate(spec, a.path());
    generate(spec, b.path());
    CHECK(tree_hash(a.path()) == tree_hash(b.path()));

    TempDir c("synth_c");
    spec.seed = 8;
    generate(spec, c.path());
    CHECK(tree_hash(a.path()) != tree_hash(c.path()));
}

TEST_CASE("round-robin folds balance both classes") {
    TempDir tmp("synth_folds");
    CorpusSpec spec;
    spec.seed = 1;
    spec.videos_per_class = 20;
    spec.frames_min = 1;
    spec.frames_max = 1;
    spec.image_size = 32;
    spec.folds = 5;
    const GeneratedCorpus corpus = generate(spec, tmp.path());
    std::map<int, int> pos_count, neg_count;
    for (const auto& e : corpus.entries) {
        (e.label > 0 ? pos_count : neg_count)[e.fold]++;
    }
    for (int f = 0; f < 5; ++f) {
        CHECK(pos_count[f] == 4);
        CHECK(neg_count[f] == 4);
    }
}

TEST_CASE("generated frames load through the imaging module") {
    TempDir tmp("synth_load");
    CorpusSpec spec;
    spec.seed = 3;
    spec.videos_per_class = 2;
    spec.frames_min = 2;
    spec.frames_max = 2;
    spec.image_size = 40;
    spec.folds = 2;
    const GeneratedCorpus corpus = generate(spec, tmp.path());
    for (const auto& e : corpus.entries) {
        for (const auto& kf : e.keyframes) {
            const GrayImage img = load_pgm(tmp.path() / kf);
            CHECK(img.width == 40);
            CHECK(img.height == 40);
            CHECK(img.data.size() == 40u * 40u);
        }
    }
}

TEST_CASE("invalid corpus specs are rejected") {
    CorpusSpec spec;
    spec.frames_min = 0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = CorpusSpec{};
    spec.folds = 1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = CorpusSpec{};
    spec.videos_per_class = 3;
    spec.folds = 5;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec = CorpusSpec{};
    spec.class_gap = 0.0;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("classes separate in BoW space at full gap") {
    TempDir tmp("synth_sep");
    CorpusSpec spec;
    spec.seed = 7;
    spec.videos_per_class = 6;
    spec.frames_min = 3;
    spec.frames_max = 4;
    spec.image_size = 64;
    spec.folds = 2;
    spec.class_gap = 1.0;
    const GeneratedCorpus corpus = generate(spec, tmp.path());

    DescriptorConfig dcfg;
    std::vector<DescriptorSet> all;
    std::vector<std::pair<int, size_t>> frame_labels; // label, index into all
    for (const auto& e : corpus.entries) {
        for (const auto& kf : e.keyframes) {
            all.push_back(extract_frame(load_pgm(tmp.path() / kf), dcfg));
            frame_labels.push_back({e.label, all.size() - 1});
        }
    }
    const DescriptorSet pool = sample_pool(all, 1000000, 1);
    const Codebook cb = kmedians(pool, 16, 50, 1).codebook;

    std::vector<std::vector<double>> pos, neg;
    for (const auto& [label, idx] : frame_labels) {
        (label > 0 ? pos : neg).push_back(encode_bow(all[idx], cb).values);
    }
    auto mean_of = [](const std::vector<std::vector<double>>& vs) {
        std::vector<double> m(vs[0].size(), 0.0);
        for (const auto& v : vs) {
            for (size_t i = 0; i < v.size(); ++i) m[i] += v[i];
        }
        for (auto& x : m) x /= static_cast<double>(vs.size());
        return m;
    };
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    const auto mp = mean_of(pos);
    const auto mn = mean_of(neg);
    const double margin = dist(mp, mn);
    auto spread_of = [&](const std::vector<std::vector<double>>& vs,
                         const std::vector<double>& m) {
        double s = 0.0;
        for (const auto& v : vs) s += dist(v, m);
        return s / static_cast<double>(vs.size());
    };
    const double spread = std::max(spread_of(pos, mp), spread_of(neg, mn));

    CHECK(margin > 0.0);
    CHECK(margin > spread);
    // regression pin from the first generation of this corpus
    CHECK(margin == doctest::Approx(0.40629618505484966).epsilon(1e-9));
}

TEST_CASE("inject_minority_frames") {
    CorpusSpec spec;
    spec.image_size = 32;
    Rng style_rng(9);
    const TextureStyle neg = TextureStyle::sample(-1, spec, style_rng);
    const TextureStyle pos = TextureStyle::sample(1, spec, style_rng);

    Rng render_rng(10);
    std::vector<GrayImage> frames;
    for (int i = 0; i < 9; ++i) frames.push_back(neg.render(32, render_rng));
    const std::vector<GrayImage> original = frames;

    SUBCASE("k = 0 leaves frames unchanged") {
        Rng rng(1);
        auto copy = frames;
        const auto idx = inject_minority_frames(
            copy, 0, [&] { return pos.render(32, render_rng); }, rng);
        CHECK(idx.empty());
        for (size_t i = 0; i < copy.size(); ++i) CHECK(copy[i].data == original[i].data);
    }

    SUBCASE("9 frames with k = 3 keep 6 originals") {
        Rng rng(2);
        Rng gen_rng(3);
        auto copy = frames;
        const auto idx = inject_minority_frames(
            copy, 3, [&] { return pos.render(32, gen_rng); }, rng);
        REQUIRE(idx.size() == 3);
        size_t untouched = 0;
        for (size_t i = 0; i < copy.size(); ++i) {
            if (copy[i].data == original[i].data) ++untouched;
        }
        CHECK(untouched == 6);
        for (size_t i : idx) CHECK(copy[i].data != original[i].data);
    }

    SUBCASE("replacement indices are deterministic per seed") {
        Rng rng_a(5), rng_b(5), gen_a(6), gen_b(6);
        auto copy_a = frames, copy_b = frames;
        const auto ia = inject_minority_frames(
            copy_a, 3, [&] { return pos.render(32, gen_a); }, rng_a);
        const auto ib = inject_minority_frames(
            copy_b, 3, [&] { return pos.render(32, gen_b); }, rng_b);
        CHECK(ia == ib);
    }

    SUBCASE("k >= frame count is rejected") {
        Rng rng(7);
        auto copy = frames;
        CHECK_THROWS_AS(inject_minority_frames(
                            copy, 9, [&] { return pos.render(32, render_rng); }, rng),
                        ConfigError);
    }
}
