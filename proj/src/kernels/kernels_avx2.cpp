// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
// Compiled with -mavx2 only; callers must gate on backend_available(Avx2).
#include "vidbossa/kernels.hpp"

#include <cmath>
#include <immintrin.h>

namespace vidbossa::kern::avx2 {

namespace {

// Byte-sliced popcount (nibble LUT + shuffle), summed into 4 u64 lanes.
inline __m256i popcount_epi64(__m256i v) {
    const __m256i lut = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                                         0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
    const __m256i low_mask = _mm256_set1_epi8(0x0f);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
    const __m256i cnt =
        _mm256_add_epi8(_mm256_shuffle_epi8(lut, lo), _mm256_shuffle_epi8(lut, hi));
    return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

inline uint64_t hsum_epi64(__m256i v) {
    const __m128i lo = _mm256_castsi256_si128(v);
    const __m128i hi = _mm256_extracti128_si256(v, 1);
    const __m128i s = _mm_add_epi64(lo, hi);
    return static_cast<uint64_t>(_mm_extract_epi64(s, 0)) +
           static_cast<uint64_t>(_mm_extract_epi64(s, 1));
}

inline double hsum_pd(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

} // namespace

uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords) {
    __m256i acc = _mm256_setzero_si256();
    size_t i = 0;
    for (; i + 4 <= nwords; i += 4) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        acc = _mm256_add_epi64(acc, popcount_epi64(_mm256_xor_si256(va, vb)));
    }
    uint64_t sum = hsum_epi64(acc);
    for (; i < nwords; ++i) {
        sum += static_cast<uint64_t>(__builtin_popcountll(a[i] ^ b[i]));
    }
    return static_cast<uint32_t>(sum);
}

void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out) {
    // D = 256 bits (4 words) is the common case: one vector per row.
    if (nwords == 4) {
        const __m256i vq = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(q));
        for (size_t i = 0; i < m; ++i) {
            const __m256i vr =
                _mm256_loadu_si256(reinterpret_cast<const __m256i*>(rows + i * 4));
            out[i] = static_cast<uint32_t>(hsum_epi64(popcount_epi64(_mm256_xor_si256(vq, vr))));
        }
        return;
    }
    for (size_t i = 0; i < m; ++i) {
        out[i] = hamming(q, rows + i * nwords, nwords);
    }
}

void min_inplace(double* acc, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(acc + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(acc + i, _mm256_min_pd(va, vx));
    }
    for (; i < n; ++i) acc[i] = acc[i] < x[i] ? acc[i] : x[i];
}

void max_inplace(double* acc, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(acc + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(acc + i, _mm256_max_pd(va, vx));
    }
    for (; i < n; ++i) acc[i] = acc[i] > x[i] ? acc[i] : x[i];
}

void add_inplace(double* acc, const double* x, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d va = _mm256_loadu_pd(acc + i);
        const __m256d vx = _mm256_loadu_pd(x + i);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(va, vx));
    }
    for (; i < n; ++i) acc[i] += x[i];
}

double l2_distance(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double sum = hsum_pd(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double l1_distance(const double* a, const double* b, size_t n) {
    const __m256d sign_mask = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(sign_mask, d));
    }
    double sum = hsum_pd(acc);
    for (; i < n; ++i) sum += std::fabs(a[i] - b[i]);
    return sum;
}

} // namespace vidbossa::kern::avx2
