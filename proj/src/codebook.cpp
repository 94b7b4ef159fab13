// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "vidbossa/io_util.hpp"
#include "vidbossa/kernels.hpp"
#include "vidbossa/rng.hpp"

namespace vidbossa {

uint32_t hamming(const BinaryDescriptor& a, const BinaryDescriptor& b) {
    if (a.bits != b.bits) {
        throw ContractViolation("hamming: descriptor lengths differ (" + std::to_string(a.bits) +
                                " vs " + std::to_string(b.bits) + ")");
    }
    return kern::hamming(a.words.data(), b.words.data(), a.words.size());
}

namespace {

struct AssignOutcome {
    bool changed = false;
    bool repaired = false;
    uint64_t cost = 0;
};

// Nearest centroid per point, ties to the lowest index; then reseeds any
// empty cluster from the globally farthest point whose cluster can spare it.
AssignOutcome assign_step(const DescriptorSet& train, std::vector<uint64_t>& centroid_words,
                          uint32_t M, size_t wpd, std::vector<uint32_t>& assign,
                          std::vector<uint32_t>& dist, std::vector<uint32_t>& sizes) {
    const size_t n = train.count;
    AssignOutcome out;

    std::vector<uint32_t> row(M);
    for (size_t j = 0; j < n; ++j) {
        kern::hamming_batch(train.words.data() + j * wpd, centroid_words.data(), M, wpd,
                            row.data());
        uint32_t best = 0;
        for (uint32_t m = 1; m < M; ++m) {
            if (row[m] < row[best]) best = m;
        }
        if (assign[j] != best) {
            assign[j] = best;
            out.changed = true;
        }
        dist[j] = row[best];
    }

    sizes.assign(M, 0);
    for (size_t j = 0; j < n; ++j) sizes[assign[j]]++;

    for (uint32_t e = 0; e < M; ++e) {
        if (sizes[e] != 0) continue;
        // Farthest point whose current cluster keeps at least one member;
        // ties go to the lowest point index. One exists whenever n >= M.
        size_t pick = n;
        uint32_t best_d = 0;
        for (size_t j = 0; j < n; ++j) {
            if (sizes[assign[j]] < 2) continue;
            if (pick == n || dist[j] > best_d) {
                pick = j;
                best_d = dist[j];
            }
        }
        if (pick == n) break; // n < M; leave the cluster empty
        std::memcpy(centroid_words.data() + static_cast<size_t>(e) * wpd,
                    train.words.data() + pick * wpd, wpd * sizeof(uint64_t));
        sizes[assign[pick]]--;
        assign[pick] = e;
        sizes[e] = 1;
        dist[pick] = 0;
        out.repaired = true;
        out.changed = true;
    }

    for (size_t j = 0; j < n; ++j) out.cost += dist[j];
    return out;
}

// Per-bit majority over each cluster's members; a 50/50 tie keeps the
// previous centroid bit, so converged centroids are stable.
void majority_update(const DescriptorSet& train, const std::vector<uint32_t>& assign,
                     const std::vector<uint32_t>& sizes, uint32_t M, uint32_t D, size_t wpd,
                     std::vector<uint64_t>& centroid_words) {
    std::vector<uint32_t> bit_counts(static_cast<size_t>(M) * D, 0);
    for (size_t j = 0; j < train.count; ++j) {
        const uint64_t* dw = train.words.data() + j * wpd;
        uint32_t* counts = bit_counts.data() + static_cast<size_t>(assign[j]) * D;
        for (uint32_t b = 0; b < D; ++b) {
            counts[b] += static_cast<uint32_t>((dw[b / 64] >> (b % 64)) & 1u);
        }
    }
    for (uint32_t m = 0; m < M; ++m) {
        if (sizes[m] == 0) continue;
        uint64_t* cw = centroid_words.data() + static_cast<size_t>(m) * wpd;
        const uint32_t* counts = bit_counts.data() + static_cast<size_t>(m) * D;
        for (uint32_t b = 0; b < D; ++b) {
            const uint32_t ones = counts[b];
            const uint32_t twice = 2 * ones;
            if (twice > sizes[m])
                cw[b / 64] |= uint64_t{1} << (b % 64);
            else if (twice < sizes[m])
                cw[b / 64] &= ~(uint64_t{1} << (b % 64));
            // exact tie: keep previous bit
        }
    }
}

} // namespace

KMediansResult kmedians(const DescriptorSet& train, uint32_t M, uint32_t max_iter,
                        uint64_t seed) {
    if (M < 2) throw ConfigError("kmedians: M must be >= 2, got " + std::to_string(M));
    if (train.count < M) {
        throw ConfigError("kmedians: need at least M=" + std::to_string(M) +
                          " training descriptors, got " + std::to_string(train.count));
    }

    const size_t n = train.count;
    const uint32_t D = train.bits;
    const size_t wpd = train.words_per_desc();

    KMediansResult res;
    res.codebook.M = M;
    res.codebook.D = D;
    res.codebook.seed = seed;
    res.codebook.train_size = n;

    // Init: M distinct points, uniform without replacement (partial
    // Fisher-Yates over the index array).
    Rng rng(seed);
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (uint32_t i = 0; i < M; ++i) {
        const size_t j = i + static_cast<size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    std::vector<uint64_t> centroid_words(static_cast<size_t>(M) * wpd);
    for (uint32_t m = 0; m < M; ++m) {
        std::memcpy(centroid_words.data() + static_cast<size_t>(m) * wpd,
                    train.words.data() + idx[m] * wpd, wpd * sizeof(uint64_t));
    }

    std::vector<uint32_t> assign(n, M); // M = "unassigned" sentinel
    std::vector<uint32_t> dist(n, 0);
    std::vector<uint32_t> sizes;

    for (uint32_t iter = 0; iter < max_iter; ++iter) {
        const AssignOutcome out =
            assign_step(train, centroid_words, M, wpd, assign, dist, sizes);
        res.iteration_costs.push_back(out.cost);
        res.iterations = iter + 1;
        if (!out.changed && !out.repaired) {
            res.converged = true;
            break;
        }
        // Skip the update on the final iteration so the returned assignment
        // stays consistent with the returned centroids.
        if (iter + 1 < max_iter) {
            majority_update(train, assign, sizes, M, D, wpd, centroid_words);
        }
    }

    res.codebook.words = std::move(centroid_words);
    res.final_assignment = assign;
    res.cluster_sizes = sizes;

    // sigma_m: population std of member distances to the final centroid.
    // Clusters with <= 1 member fall back to the mean sigma of the others.
    res.codebook.sigmas.assign(M, 0.0);
    std::vector<double> sum(M, 0.0), sumsq(M, 0.0);
    for (size_t j = 0; j < n; ++j) {
        const double d = dist[j];
        sum[assign[j]] += d;
        sumsq[assign[j]] += d * d;
    }
    double fallback_acc = 0.0;
    uint32_t fallback_n = 0;
    for (uint32_t m = 0; m < M; ++m) {
        if (sizes[m] >= 2) {
            const double mean = sum[m] / sizes[m];
            const double var = sumsq[m] / sizes[m] - mean * mean;
            res.codebook.sigmas[m] = var > 0.0 ? std::sqrt(var) : 0.0;
            fallback_acc += res.codebook.sigmas[m];
            ++fallback_n;
        }
    }
    const double fallback = fallback_n > 0 ? fallback_acc / fallback_n : 0.0;
    for (uint32_t m = 0; m < M; ++m) {
        if (sizes[m] < 2) res.codebook.sigmas[m] = fallback;
    }
    return res;
}

Assignment assign_knn(std::span<const uint64_t> x_words, uint32_t x_bits, const Codebook& cb,
                      uint32_t k) {
    if (x_bits != cb.D) {
        throw ContractViolation("assign_knn: descriptor has " + std::to_string(x_bits) +
                                " bits, codebook expects " + std::to_string(cb.D));
    }
    if (k < 1 || k > cb.M) {
        throw ConfigError("assign_knn: k must be in [1, M=" + std::to_string(cb.M) + "], got " +
                          std::to_string(k));
    }
    std::vector<uint32_t> row(cb.M);
    kern::hamming_batch(x_words.data(), cb.words.data(), cb.M, cb.words_per_desc(), row.data());

    Assignment a;
    a.neighbors.resize(cb.M);
    for (uint32_t m = 0; m < cb.M; ++m) a.neighbors[m] = {m, row[m]};
    const auto by_dist_then_index = [](const Neighbor& lhs, const Neighbor& rhs) {
        return lhs.distance != rhs.distance ? lhs.distance < rhs.distance
                                            : lhs.index < rhs.index;
    };
    std::partial_sort(a.neighbors.begin(), a.neighbors.begin() + k, a.neighbors.end(),
                      by_dist_then_index);
    a.neighbors.resize(k);
    return a;
}

Assignment assign_knn(const BinaryDescriptor& x, const Codebook& cb, uint32_t k) {
    return assign_knn(std::span<const uint64_t>(x.words), x.bits, cb, k);
}

DescriptorSet sample_pool(const std::vector<DescriptorSet>& sets, size_t limit, uint64_t seed) {
    size_t total = 0;
    uint32_t bits = 0;
    for (const auto& s : sets) {
        if (s.count == 0) continue;
        if (bits == 0) bits = s.bits;
        if (s.bits != bits) {
            throw ContractViolation("sample_pool: descriptor sets disagree on bit length");
        }
        total += s.count;
    }
    DescriptorSet pool(bits == 0 ? 8 : bits, "pool");
    if (total == 0) return pool;

    if (total <= limit) {
        for (const auto& s : sets) {
            for (size_t j = 0; j < s.count; ++j) pool.push(s.at(j));
        }
        return pool;
    }

    // Select `limit` global indices without replacement, emitted in
    // ascending order so the pool is independent of set iteration quirks.
    Rng rng(seed);
    std::vector<size_t> idx(total);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (size_t i = 0; i < limit; ++i) {
        const size_t j = i + static_cast<size_t>(rng.next_below(total - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());

    size_t base = 0, next = 0;
    for (const auto& s : sets) {
        for (; next < idx.size() && idx[next] < base + s.count; ++next) {
            pool.push(s.at(idx[next] - base));
        }
        base += s.count;
    }
    return pool;
}

namespace {
constexpr char kBcbkMagic[4] = {'B', 'C', 'B', 'K'};
}

void write_codebook_file(const Codebook& cb, const std::filesystem::path& path) {
    ByteWriter w;
    w.bytes(kBcbkMagic, 4);
    w.u8(1);
    w.u32le(cb.M);
    w.u32le(cb.D);
    const size_t bytes_per_desc = (cb.D + 7) / 8;
    const size_t wpd = cb.words_per_desc();
    for (uint32_t m = 0; m < cb.M; ++m) {
        const uint64_t* cw = cb.words.data() + static_cast<size_t>(m) * wpd;
        for (size_t b = 0; b < bytes_per_desc; ++b) {
            w.u8(static_cast<uint8_t>(cw[b / 8] >> (8 * (b % 8))));
        }
    }
    for (uint32_t m = 0; m < cb.M; ++m) w.f64le(cb.sigmas[m]);
    write_file_bytes(path, w.data());
}

Codebook read_codebook_file(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size(), path.string());
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, kBcbkMagic, 4) != 0) {
        throw FormatError(path.string() + ": bad magic \"" +
                          std::string(reinterpret_cast<const char*>(magic), 4) +
                          "\" (expected BCBK)");
    }
    const uint8_t version = r.u8();
    if (version != 1) {
        throw FormatError(path.string() + ": unsupported BCBK version " +
                          std::to_string(version));
    }
    Codebook cb;
    cb.M = r.u32le();
    cb.D = r.u32le();
    if (cb.M < 2) throw FormatError(path.string() + ": codebook M must be >= 2");
    if (cb.D == 0) throw FormatError(path.string() + ": codebook D must be > 0");
    const size_t bytes_per_desc = (cb.D + 7) / 8;
    const size_t wpd = cb.words_per_desc();
    cb.words.assign(static_cast<size_t>(cb.M) * wpd, 0);
    for (uint32_t m = 0; m < cb.M; ++m) {
        const uint8_t* payload = r.take(bytes_per_desc);
        uint64_t* cw = cb.words.data() + static_cast<size_t>(m) * wpd;
        for (size_t b = 0; b < bytes_per_desc; ++b) {
            cw[b / 8] |= static_cast<uint64_t>(payload[b]) << (8 * (b % 8));
        }
    }
    cb.sigmas.resize(cb.M);
    for (uint32_t m = 0; m < cb.M; ++m) cb.sigmas[m] = r.f64le();
    return cb;
}

} // namespace vidbossa
