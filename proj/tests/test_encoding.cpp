// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vidbossa/encoding.hpp"
#include "vidbossa/io_util.hpp"
#include "vidbossa/rng.hpp"
#include "test_util.hpp"

using namespace vidbossa;

namespace {

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

Codebook random_codebook(Rng& rng, uint32_t bits, uint32_t M, double sigma_lo = 1.0,
                         double sigma_hi = 20.0) {
    Codebook cb;
    cb.M = M;
    cb.D = bits;
    const size_t wpd = cb.words_per_desc();
    cb.words.resize(static_cast<size_t>(M) * wpd);
    for (auto& w : cb.words) w = rng.next();
    const uint32_t tail = bits % 64;
    if (tail != 0) {
        for (uint32_t m = 0; m < M; ++m) {
            cb.words[static_cast<size_t>(m) * wpd + wpd - 1] &= (uint64_t{1} << tail) - 1;
        }
    }
    cb.sigmas.resize(M);
    for (auto& s : cb.sigmas) s = sigma_lo + rng.next_double() * (sigma_hi - sigma_lo);
    return cb;
}

// Unoptimized reference for BoW: per-descriptor argmin loop.
std::vector<double> bow_oracle(const DescriptorSet& set, const Codebook& cb) {
    std::vector<double> h(cb.M, 0.0);
    if (set.count == 0) return h;
    for (size_t j = 0; j < set.count; ++j) {
        const BinaryDescriptor x(set.bits, set.at(j));
        uint32_t best = 0;
        uint32_t best_d = hamming(x, cb.centroid_descriptor(0));
        for (uint32_t m = 1; m < cb.M; ++m) {
            const uint32_t d = hamming(x, cb.centroid_descriptor(m));
            if (d < best_d) {
                best_d = d;
                best = m;
            }
        }
        h[best] += 1.0;
    }
    for (auto& v : h) v /= static_cast<double>(set.count);
    return h;
}

// Naive triple loop (descriptor x codeword x bin) producing raw counts.
struct BossaOracle {
    std::vector<double> hist; // M*B raw counts
    std::vector<double> tail; // M raw nearest counts
};

BossaOracle bossa_oracle(const DescriptorSet& set, const Codebook& cb, const BossaParams& p) {
    BossaOracle o;
    o.hist.assign(static_cast<size_t>(cb.M) * p.B, 0.0);
    o.tail.assign(cb.M, 0.0);
    for (size_t j = 0; j < set.count; ++j) {
        const BinaryDescriptor x(set.bits, set.at(j));
        std::vector<std::pair<uint32_t, uint32_t>> dist; // (distance, index)
        for (uint32_t m = 0; m < cb.M; ++m) {
            dist.push_back({hamming(x, cb.centroid_descriptor(m)), m});
        }
        std::sort(dist.begin(), dist.end());
        o.tail[dist[0].second] += 1.0;
        for (uint32_t r = 0; r < p.knn; ++r) {
            const uint32_t m = dist[r].second;
            if (cb.sigmas[m] == 0.0) continue;
            const double a_min = p.lambda_min * cb.sigmas[m];
            const double a_max = p.lambda_max * cb.sigmas[m];
            const double alpha = dist[r].first;
            for (uint32_t b = 0; b < p.B; ++b) {
                const double lo = a_min + (a_max - a_min) * static_cast<double>(b) / p.B;
                const double hi = a_min + (a_max - a_min) * static_cast<double>(b + 1) / p.B;
                const bool in_bin =
                    (alpha >= lo && alpha < hi) || (b == p.B - 1 && alpha == hi);
                if (in_bin) o.hist[static_cast<size_t>(m) * p.B + b] += 1.0;
            }
        }
    }
    return o;
}

} // namespace

TEST_CASE("encode_bow spec cases") {
    Rng rng(1);
    Codebook cb = random_codebook(rng, 32, 8);

    SUBCASE("all descriptors at one codeword give a one-hot vector") {
        DescriptorSet set(32);
        for (int i = 0; i < 5; ++i) set.push(cb.centroid(3));
        const MidLevelVector v = encode_bow(set, cb);
        for (uint32_t m = 0; m < 8; ++m) CHECK(v.values[m] == (m == 3 ? 1.0 : 0.0));
    }

    SUBCASE("nonempty histograms sum to one") {
        const DescriptorSet set = random_set(rng, 32, 33);
        const MidLevelVector v = encode_bow(set, cb);
        const double sum = std::accumulate(v.values.begin(), v.values.end(), 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("empty set encodes to the zero vector") {
        const MidLevelVector v = encode_bow(DescriptorSet(32), cb);
        CHECK(v.values.size() == 8);
        for (double x : v.values) CHECK(x == 0.0);
    }

    SUBCASE("matches the argmin-loop oracle") {
        for (int rep = 0; rep < 20; ++rep) {
            const DescriptorSet set = random_set(rng, 32, 20);
            CHECK(encode_bow(set, cb).values == bow_oracle(set, cb));
        }
    }

    SUBCASE("dimension mismatch is rejected") {
        CHECK_THROWS_AS(encode_bow(random_set(rng, 64, 3), cb), ContractViolation);
    }
}

TEST_CASE("encode_bossanova single descriptor at a codeword") {
    Rng rng(2);
    Codebook cb = random_codebook(rng, 32, 4, 2.0, 6.0);
    BossaParams p;
    p.B = 5;
    p.lambda_min = 0.0;
    p.lambda_max = 3.0;
    p.s = 1e-3;
    p.knn = 2;

    DescriptorSet set(32);
    set.push(cb.centroid(1));
    const MidLevelVector v = encode_bossanova(set, cb, p);

    REQUIRE(v.values.size() == 4 * (5 + 1));
    // distance 0 lands in bin 0 of codeword 1 (lambda_min = 0)
    CHECK(v.values[1 * 5 + 0] == 1.0); // count 1 / N=1
    for (uint32_t b = 1; b < 5; ++b) CHECK(v.values[1 * 5 + b] == 0.0);
    // tail entry for codeword 1 is s * t_1 = s * 1
    const size_t tail_base = 4 * 5;
    CHECK(v.values[tail_base + 1] == p.s);
    for (uint32_t m = 0; m < 4; ++m) {
        if (m != 1) CHECK(v.values[tail_base + m] == 0.0);
    }
}

TEST_CASE("encode_bossanova codewords outside every knn stay zero") {
    Rng rng(3);
    Codebook cb = random_codebook(rng, 32, 3);
    BossaParams p;
    p.B = 4;
    p.knn = 1;

    DescriptorSet set(32);
    for (int i = 0; i < 6; ++i) set.push(cb.centroid(0)); // nearest is always 0
    const MidLevelVector v = encode_bossanova(set, cb, p);
    for (uint32_t b = 0; b < 4; ++b) {
        CHECK(v.values[2 * 4 + b] == 0.0);
    }
    CHECK(v.values[3 * 4 + 2] == 0.0); // t_2
}

TEST_CASE("encode_bossanova output length is M*(B+1)") {
    Rng rng(4);
    Codebook cb = random_codebook(rng, 16, 4);
    BossaParams p;
    p.B = 10;
    p.knn = 4;
    const MidLevelVector v = encode_bossanova(random_set(rng, 16, 7), cb, p);
    CHECK(v.values.size() == 44);
    CHECK(v.layout == Layout::BOSSANOVA);
}

TEST_CASE("encode_bossanova matches the naive triple-loop oracle exactly") {
    Rng rng(5);
    for (int rep = 0; rep < 40; ++rep) {
        const uint32_t M = 2 + static_cast<uint32_t>(rng.next_below(7));
        const uint32_t bits = 16;
        BossaParams p;
        p.B = 1 + static_cast<uint32_t>(rng.next_below(5));
        p.lambda_min = rng.next_below(2) == 0 ? 0.0 : 0.5;
        p.lambda_max = p.lambda_min + 1.0 + rng.next_double() * 3.0;
        p.s = 1e-3;
        p.knn = 1 + static_cast<uint32_t>(rng.next_below(M));
        Codebook cb = random_codebook(rng, bits, M, 0.5, 8.0);
        if (rng.next_below(4) == 0) cb.sigmas[rng.next_below(M)] = 0.0;
        const DescriptorSet set = random_set(rng, bits, 1 + rng.next_below(50));

        const MidLevelVector got = encode_bossanova(set, cb, p, /*normalize_counts=*/false);
        const BossaOracle want = bossa_oracle(set, cb, p);
        for (uint32_t m = 0; m < M; ++m) {
            for (uint32_t b = 0; b < p.B; ++b) {
                CHECK(got.values[static_cast<size_t>(m) * p.B + b] ==
                      want.hist[static_cast<size_t>(m) * p.B + b]);
            }
            CHECK(got.values[static_cast<size_t>(M) * p.B + m] == p.s * want.tail[m]);
        }

        // each descriptor feeds at most knn histograms and exactly one tail
        const double tail_total =
            std::accumulate(want.tail.begin(), want.tail.end(), 0.0);
        const double hist_total =
            std::accumulate(want.hist.begin(), want.hist.end(), 0.0);
        CHECK(tail_total == static_cast<double>(set.count));
        CHECK(hist_total <= static_cast<double>(set.count) * p.knn);
    }
}

TEST_CASE("encode_bossanova ignores descriptors beyond lambda_max*sigma") {
    Codebook cb;
    cb.M = 2;
    cb.D = 16;
    cb.words = {0x0000, 0xffff}; // one word per centroid
    cb.sigmas = {2.0, 2.0};
    BossaParams p;
    p.B = 4;
    p.lambda_min = 0.0;
    p.lambda_max = 3.0; // range [0, 6]
    p.knn = 2;

    DescriptorSet set(16);
    BinaryDescriptor far(16);
    for (uint32_t i = 0; i < 8; ++i) far.set(i, true); // distance 8 to both centroids
    set.push(far);
    const MidLevelVector v = encode_bossanova(set, cb, p);
    for (uint32_t i = 0; i < 2 * 4; ++i) CHECK(v.values[i] == 0.0);
    // the tail still counts the nearest codeword
    CHECK(v.values[2 * 4 + 0] + v.values[2 * 4 + 1] > 0.0);
}

TEST_CASE("sweeping knn grows histogram support monotonically") {
    Rng rng(55);
    Codebook cb = random_codebook(rng, 32, 12, 1.0, 10.0);
    const DescriptorSet set = random_set(rng, 32, 30);
    BossaParams p;
    p.B = 4;

    std::vector<std::vector<double>> by_knn;
    for (uint32_t knn : {1u, 2u, 5u, 12u}) {
        p.knn = knn;
        by_knn.push_back(encode_bossanova(set, cb, p, /*normalize_counts=*/false).values);
    }
    const size_t hist_len = 12 * 4;
    for (size_t k = 1; k < by_knn.size(); ++k) {
        // a larger neighborhood can only add histogram counts
        for (size_t i = 0; i < hist_len; ++i) {
            CHECK(by_knn[k][i] >= by_knn[k - 1][i]);
        }
        // tails count single nearest codewords and are knn-independent
        for (size_t i = hist_len; i < by_knn[k].size(); ++i) {
            CHECK(by_knn[k][i] == by_knn[0][i]);
        }
    }
}

TEST_CASE("encoding is invariant to descriptor order") {
    Rng rng(6);
    Codebook cb = random_codebook(rng, 32, 6);
    const DescriptorSet set = random_set(rng, 32, 25);
    DescriptorSet shuffled(32);
    std::vector<size_t> order(set.count);
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.next_below(i)]);
    }
    for (size_t j : order) shuffled.push(set.at(j));

    CHECK(encode_bow(set, cb).values == encode_bow(shuffled, cb).values);
    BossaParams p;
    p.B = 3;
    p.knn = 2;
    CHECK(encode_bossanova(set, cb, p).values == encode_bossanova(shuffled, cb, p).values);
}

TEST_CASE("normalize") {
    MidLevelVector v;
    v.layout = Layout::BOW;
    v.M = 2;
    v.values = {3.0, 4.0};
    const MidLevelVector n = normalize(v, NormMode::L2);
    CHECK(n.values[0] == doctest::Approx(0.6));
    CHECK(n.values[1] == doctest::Approx(0.8));
    CHECK(normalize(v, NormMode::None).values == v.values);

    MidLevelVector zero;
    zero.layout = Layout::BOW;
    zero.M = 3;
    zero.values = {0.0, 0.0, 0.0};
    CHECK(normalize(zero, NormMode::L2).values == zero.values);

    Rng rng(7);
    for (int rep = 0; rep < 10; ++rep) {
        MidLevelVector r;
        r.layout = Layout::BOW;
        r.M = 8;
        for (int i = 0; i < 8; ++i) r.values.push_back(rng.next_double());
        const MidLevelVector rn = normalize(r, NormMode::L2);
        double norm = 0.0;
        for (double x : rn.values) norm += x * x;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("BFVC files round-trip and validate the layout formula") {
    TempDir tmp("bfvc");
    Rng rng(8);
    Codebook cb = random_codebook(rng, 32, 4);
    BossaParams p;
    p.B = 10;
    p.knn = 2;
    const MidLevelVector v = encode_bossanova(random_set(rng, 32, 9), cb, p);
    write_feature_file(v, tmp / "v.bfvc");
    const MidLevelVector back = read_feature_file(tmp / "v.bfvc");
    CHECK(back.layout == v.layout);
    CHECK(back.M == v.M);
    CHECK(back.B == v.B);
    CHECK(back.values == v.values);

    auto bytes = read_file_bytes(tmp / "v.bfvc");
    bytes[0] = 'Z';
    write_file_bytes(tmp / "bad.bfvc", bytes);
    CHECK_THROWS_AS(read_feature_file(tmp / "bad.bfvc"), FormatError);

    // corrupt the stored length so it no longer matches M*(B+1)
    auto bytes2 = read_file_bytes(tmp / "v.bfvc");
    bytes2[14] = 0x05;
    write_file_bytes(tmp / "len.bfvc", bytes2);
    CHECK_THROWS_AS(read_feature_file(tmp / "len.bfvc"), FormatError);
}
