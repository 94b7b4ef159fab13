// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>

#include "vidbossa/rng.hpp"
#include "vidbossa/video.hpp"
#include "test_util.hpp"

using namespace vidbossa;

namespace {

MidLevelVector bow_vec(std::vector<double> values) {
    MidLevelVector v;
    v.layout = Layout::BOW;
    v.M = static_cast<uint32_t>(values.size());
    v.values = std::move(values);
    return v;
}

MidLevelVector bossa_vec(uint32_t M, uint32_t B, std::vector<double> values) {
    MidLevelVector v;
    v.layout = Layout::BOSSANOVA;
    v.M = M;
    v.B = B;
    v.values = std::move(values);
    return v;
}

DescriptorSet random_set(Rng& rng, uint32_t bits, size_t n) {
    DescriptorSet s(bits);
    for (size_t i = 0; i < n; ++i) {
        BinaryDescriptor d(bits);
        for (auto& w : d.words) w = rng.next();
        const uint32_t tail = bits % 64;
        if (tail != 0) d.words.back() &= (uint64_t{1} << tail) - 1;
        s.push(d);
    }
    return s;
}

Codebook random_codebook(Rng& rng, uint32_t bits, uint32_t M) {
    Codebook cb;
    cb.M = M;
    cb.D = bits;
    cb.words.resize(static_cast<size_t>(M) * cb.words_per_desc());
    for (auto& w : cb.words) w = rng.next();
    const uint32_t tail = bits % 64;
    if (tail != 0) {
        const size_t wpd = cb.words_per_desc();
        for (uint32_t m = 0; m < M; ++m) {
            cb.words[static_cast<size_t>(m) * wpd + wpd - 1] &= (uint64_t{1} << tail) - 1;
        }
    }
    cb.sigmas.assign(M, 4.0);
    return cb;
}

} // namespace

TEST_CASE("aggregate of a single frame is the identity for every function") {
    Rng rng(1);
    std::vector<double> vals(12);
    for (auto& v : vals) v = rng.next_double();
    const MidLevelVector frame = bossa_vec(3, 3, vals);
    for (AggFn fn : {AggFn::Max, AggFn::Min, AggFn::Mean, AggFn::Median}) {
        const VideoDescriptor vd = aggregate(std::vector<MidLevelVector>{frame}, fn, fn);
        CHECK(vd.values == frame.values);
        CHECK(vd.n_frames == 1);
    }
}

TEST_CASE("median aggregation spec cases") {
    const std::vector<MidLevelVector> frames = {bow_vec({1, 3}), bow_vec({3, 5}),
                                                bow_vec({2, 4})};
    const VideoDescriptor odd = aggregate(frames, AggFn::Median, AggFn::Median);
    CHECK(odd.values == std::vector<double>{2, 4});

    const std::vector<MidLevelVector> two = {bow_vec({1, 3}), bow_vec({3, 5})};
    const VideoDescriptor even = aggregate(two, AggFn::Median, AggFn::Median);
    CHECK(even.values == std::vector<double>{2, 4}); // mean of the middle pair
}

TEST_CASE("bossanova aggregation applies agg_z to histograms and agg_t to tails") {
    // M=2, B=2: values = [z00, z01, z10, z11, t0, t1]
    const std::vector<MidLevelVector> frames = {
        bossa_vec(2, 2, {1, 5, 2, 8, 0.1, 0.9}),
        bossa_vec(2, 2, {3, 4, 0, 9, 0.5, 0.3}),
        bossa_vec(2, 2, {2, 6, 1, 7, 0.3, 0.6}),
    };
    const VideoDescriptor vd = aggregate(frames, AggFn::Min, AggFn::Max);
    CHECK(vd.values == std::vector<double>{1, 4, 0, 7, 0.5, 0.9});
}

TEST_CASE("aggregation ordering, permutation invariance and idempotence") {
    Rng rng(2);
    for (int rep = 0; rep < 30; ++rep) {
        const size_t n_frames = 2 + rng.next_below(6);
        const uint32_t M = 2, B = 3;
        std::vector<MidLevelVector> frames;
        for (size_t f = 0; f < n_frames; ++f) {
            std::vector<double> vals(M * (B + 1));
            for (auto& v : vals) v = rng.next_double() * 10;
            frames.push_back(bossa_vec(M, B, vals));
        }
        const auto vmin = aggregate(frames, AggFn::Min, AggFn::Min).values;
        const auto vmax = aggregate(frames, AggFn::Max, AggFn::Max).values;
        const auto vmean = aggregate(frames, AggFn::Mean, AggFn::Mean).values;
        const auto vmed = aggregate(frames, AggFn::Median, AggFn::Median).values;
        for (size_t i = 0; i < vmin.size(); ++i) {
            CHECK(vmin[i] <= vmed[i]);
            CHECK(vmed[i] <= vmax[i]);
            CHECK(vmin[i] <= vmean[i]);
            CHECK(vmean[i] <= vmax[i]);
        }

        std::vector<MidLevelVector> shuffled = frames;
        for (size_t i = shuffled.size(); i > 1; --i) {
            std::swap(shuffled[i - 1], shuffled[rng.next_below(i)]);
        }
        CHECK(aggregate(shuffled, AggFn::Min, AggFn::Max).values ==
              aggregate(frames, AggFn::Min, AggFn::Max).values);
        CHECK(aggregate(shuffled, AggFn::Median, AggFn::Median).values ==
              aggregate(frames, AggFn::Median, AggFn::Median).values);

        const std::vector<MidLevelVector> copies(4, frames[0]);
        for (AggFn fn : {AggFn::Max, AggFn::Min, AggFn::Mean, AggFn::Median}) {
            CHECK(aggregate(copies, fn, fn).values == frames[0].values);
        }
    }
}

TEST_CASE("mean-aggregated BoW equals the arithmetic mean of frames") {
    Rng rng(3);
    std::vector<MidLevelVector> frames;
    for (int f = 0; f < 5; ++f) {
        std::vector<double> vals(8);
        for (auto& v : vals) v = rng.next_double();
        frames.push_back(bow_vec(vals));
    }
    const auto got = aggregate(frames, AggFn::Mean, AggFn::Mean).values;
    for (size_t i = 0; i < 8; ++i) {
        double sum = 0.0;
        for (const auto& f : frames) sum += f.values[i];
        CHECK(got[i] == doctest::Approx(sum / 5.0).epsilon(1e-12));
    }
}

TEST_CASE("aggregate rejects bad input") {
    CHECK_THROWS_AS(aggregate(std::vector<MidLevelVector>{}, AggFn::Max, AggFn::Max),
                    ContractViolation);
    const std::vector<MidLevelVector> mixed = {bow_vec({1, 2}), bow_vec({1, 2, 3})};
    CHECK_THROWS_AS(aggregate(mixed, AggFn::Max, AggFn::Max), ContractViolation);
    const std::vector<MidLevelVector> layouts = {bow_vec({1, 2}),
                                                 bossa_vec(1, 1, {0.5, 0.1})};
    CHECK_THROWS_AS(aggregate(layouts, AggFn::Max, AggFn::Max), ContractViolation);
}

TEST_CASE("majority_vote") {
    const std::vector<int> six_three = {-1, -1, -1, -1, -1, -1, 1, 1, 1};
    CHECK(majority_vote(six_three, TieRule::Positive) == -1);

    const std::vector<int> all_pos = {1, 1, 1};
    CHECK(majority_vote(all_pos, TieRule::Negative) == 1);

    const std::vector<int> tie = {1, 1, -1, -1};
    CHECK(majority_vote(tie, TieRule::Positive) == 1);
    CHECK(majority_vote(tie, TieRule::Negative) == -1);

    CHECK_THROWS_AS(majority_vote(std::vector<int>{}, TieRule::Positive), ContractViolation);
}

TEST_CASE("global_pool of one frame equals encoding that frame") {
    Rng rng(4);
    const Codebook cb = random_codebook(rng, 32, 8);
    EncoderConfig cfg;
    cfg.kind = Layout::BOSSANOVA;
    cfg.bossa.B = 4;
    cfg.bossa.knn = 3;
    const DescriptorSet frame = random_set(rng, 32, 15);
    const std::vector<DescriptorSet> frames = {frame};
    CHECK(global_pool(frames, cb, cfg).values == encode_frame(frame, cb, cfg).values);
}

TEST_CASE("BoW global pool is the descriptor-count-weighted mean of frame BoWs") {
    Rng rng(5);
    const Codebook cb = random_codebook(rng, 32, 8);
    EncoderConfig cfg;
    cfg.kind = Layout::BOW;
    cfg.final_norm = NormMode::None; // the identity is about raw average pooling
    for (int rep = 0; rep < 20; ++rep) {
        const size_t n1 = 1 + rng.next_below(30);
        const size_t n2 = 1 + rng.next_below(30);
        const DescriptorSet f1 = random_set(rng, 32, n1);
        const DescriptorSet f2 = random_set(rng, 32, n2);
        const std::vector<DescriptorSet> frames = {f1, f2};
        const auto pooled = global_pool(frames, cb, cfg).values;
        const auto h1 = encode_frame(f1, cb, cfg).values;
        const auto h2 = encode_frame(f2, cb, cfg).values;
        for (size_t m = 0; m < 8; ++m) {
            const double want =
                (static_cast<double>(n1) * h1[m] + static_cast<double>(n2) * h2[m]) /
                static_cast<double>(n1 + n2);
            CHECK(pooled[m] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("global_pool of empty frames is the zero vector") {
    Rng rng(6);
    const Codebook cb = random_codebook(rng, 32, 4);
    EncoderConfig cfg;
    cfg.kind = Layout::BOW;
    const std::vector<DescriptorSet> frames = {DescriptorSet(32), DescriptorSet(32)};
    const auto pooled = global_pool(frames, cb, cfg).values;
    for (double v : pooled) CHECK(v == 0.0);
}

TEST_CASE("manifest round-trips and validates") {
    TempDir tmp("manifest");
    std::vector<VideoManifestEntry> entries = {
        {"vid_a", 1, 0, {"frames/a0.pgm", "frames/a1.pgm"}},
        {"vid_b", -1, 1, {"frames/b0.pgm"}},
    };
    write_manifest(entries, tmp / "m.jsonl");
    const auto back = read_manifest(tmp / "m.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0].video_id == "vid_a");
    CHECK(back[0].label == 1);
    CHECK(back[0].fold == 0);
    CHECK(back[0].keyframes == entries[0].keyframes);
    CHECK(back[1].label == -1);

    std::ofstream bad(tmp / "bad.jsonl");
    bad << R"({"video_id":"x","label":2,"fold":0,"keyframes":["k.pgm"]})" << "\n";
    bad.close();
    CHECK_THROWS_AS(read_manifest(tmp / "bad.jsonl"), FormatError);

    std::ofstream empty_kf(tmp / "ekf.jsonl");
    empty_kf << R"({"video_id":"x","label":1,"fold":0,"keyframes":[]})" << "\n";
    empty_kf.close();
    CHECK_THROWS_AS(read_manifest(tmp / "ekf.jsonl"), FormatError);
}
