// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vidbossa/io_util.hpp"
#include "vidbossa/kernels.hpp"

namespace vidbossa {

void BossaParams::validate() const {
    if (B < 1) throw ConfigError("BossaParams: B must be >= 1");
    if (!(lambda_max > lambda_min) || lambda_min < 0.0) {
        throw ConfigError("BossaParams: need lambda_max > lambda_min >= 0");
    }
    if (s < 0.0) throw ConfigError("BossaParams: s must be >= 0");
    if (knn < 1) throw ConfigError("BossaParams: knn must be >= 1");
}

namespace {

void check_dims(const DescriptorSet& set, const Codebook& cb, const char* op) {
    if (set.count > 0 && set.bits != cb.D) {
        throw ContractViolation(std::string(op) + ": descriptors have " +
                                std::to_string(set.bits) + " bits, codebook expects " +
                                std::to_string(cb.D));
    }
}

} // namespace

MidLevelVector encode_bow(const DescriptorSet& set, const Codebook& cb) {
    check_dims(set, cb, "encode_bow");
    MidLevelVector v;
    v.layout = Layout::BOW;
    v.M = cb.M;
    v.B = 0;
    v.values.assign(cb.M, 0.0);
    if (set.count == 0) return v;

    const size_t wpd = cb.words_per_desc();
    std::vector<uint32_t> row(cb.M);
    for (size_t j = 0; j < set.count; ++j) {
        kern::hamming_batch(set.words.data() + j * wpd, cb.words.data(), cb.M, wpd, row.data());
        uint32_t best = 0;
        for (uint32_t m = 1; m < cb.M; ++m) {
            if (row[m] < row[best]) best = m;
        }
        v.values[best] += 1.0;
    }
    const double n = static_cast<double>(set.count);
    for (double& x : v.values) x /= n;
    return v;
}

MidLevelVector encode_bossanova(const DescriptorSet& set, const Codebook& cb,
                                const BossaParams& params, bool normalize_counts) {
    params.validate();
    check_dims(set, cb, "encode_bossanova");
    if (params.knn > cb.M) {
        throw ConfigError("encode_bossanova: knn=" + std::to_string(params.knn) +
                          " exceeds codebook size M=" + std::to_string(cb.M));
    }

    const uint32_t M = cb.M;
    const uint32_t B = params.B;
    MidLevelVector v;
    v.layout = Layout::BOSSANOVA;
    v.M = M;
    v.B = B;
    v.values.assign(static_cast<size_t>(M) * (B + 1), 0.0);
    if (set.count == 0) return v;

    // Bin edges per codeword: edge[b] = a_min + (a_max - a_min) * b / B.
    // Bins are [edge[b], edge[b+1]) with the last closed at edge[B], so
    // every in-range distance lands in exactly one bin.
    std::vector<double> edges(static_cast<size_t>(M) * (B + 1));
    for (uint32_t m = 0; m < M; ++m) {
        const double a_min = params.lambda_min * cb.sigmas[m];
        const double a_max = params.lambda_max * cb.sigmas[m];
        for (uint32_t b = 0; b <= B; ++b) {
            edges[static_cast<size_t>(m) * (B + 1) + b] =
                a_min + (a_max - a_min) * static_cast<double>(b) / B;
        }
    }

    const size_t wpd = cb.words_per_desc();
    std::vector<uint32_t> row(M);
    std::vector<uint32_t> order(M);
    const uint32_t k = params.knn;
    double* hist = v.values.data();
    double* tail = v.values.data() + static_cast<size_t>(M) * B;

    for (size_t j = 0; j < set.count; ++j) {
        kern::hamming_batch(set.words.data() + j * wpd, cb.words.data(), M, wpd, row.data());
        for (uint32_t m = 0; m < M; ++m) order[m] = m;
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](uint32_t a, uint32_t b) {
                              return row[a] != row[b] ? row[a] < row[b] : a < b;
                          });
        tail[order[0]] += 1.0; // single nearest codeword

        for (uint32_t r = 0; r < k; ++r) {
            const uint32_t m = order[r];
            if (cb.sigmas[m] == 0.0) continue; // degenerate cluster: histogram stays zero
            const double* e = edges.data() + static_cast<size_t>(m) * (B + 1);
            const double alpha = row[m];
            if (alpha < e[0] || alpha > e[B]) continue;
            uint32_t bin = B - 1;
            for (uint32_t b = 0; b < B; ++b) {
                if (alpha < e[b + 1]) {
                    bin = b;
                    break;
                }
            }
            hist[static_cast<size_t>(m) * B + bin] += 1.0;
        }
    }

    if (normalize_counts) {
        const double n = static_cast<double>(set.count);
        for (double& x : v.values) x /= n;
    }
    for (uint32_t m = 0; m < M; ++m) tail[m] *= params.s;
    return v;
}

MidLevelVector normalize(const MidLevelVector& v, NormMode mode) {
    if (mode == NormMode::None) return v;
    double sumsq = 0.0;
    for (double x : v.values) sumsq += x * x;
    if (sumsq == 0.0) return v;
    MidLevelVector out = v;
    const double inv = 1.0 / std::sqrt(sumsq);
    for (double& x : out.values) x *= inv;
    return out;
}

namespace {
constexpr char kBfvcMagic[4] = {'B', 'F', 'V', 'C'};
}

void write_feature_file(const MidLevelVector& v, const std::filesystem::path& path) {
    if (v.values.size() != v.expected_length()) {
        throw ContractViolation("BFVC: vector length " + std::to_string(v.values.size()) +
                                " does not match layout formula " +
                                std::to_string(v.expected_length()));
    }
    ByteWriter w;
    w.bytes(kBfvcMagic, 4);
    w.u8(1);
    w.u8(static_cast<uint8_t>(v.layout));
    w.u32le(v.M);
    w.u32le(v.B);
    w.u32le(static_cast<uint32_t>(v.values.size()));
    for (double x : v.values) w.f64le(x);
    write_file_bytes(path, w.data());
}

MidLevelVector read_feature_file(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kBfvcMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic \"" +
                          std::string(reinterpret_cast<const char*>(magic), 4) +
                          "\" (expected BFVC)");
    }
    const uint8_t version = r.u8();
    if (version != 1) {
        throw FormatError(path.string() + ": unsupported BFVC version " +
                          std::to_string(version));
    }
    const uint8_t layout = r.u8();
    if (layout > 1) {
        throw FormatError(path.string() + ": unknown layout " + std::to_string(layout));
    }
    MidLevelVector v;
    v.layout = static_cast<Layout>(layout);
    v.M = r.u32le();
    v.B = r.u32le();
    const uint32_t len = r.u32le();
    if (len != v.expected_length()) {
        throw FormatError(path.string() + ": stored length " + std::to_string(len) +
                          " does not match layout formula " +
                          std::to_string(v.expected_length()));
    }
    v.values.resize(len);
    for (uint32_t i = 0; i < len; ++i) v.values[i] = r.f64le();
    return v;
}

} // namespace vidbossa
