// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#include "vidbossa/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

namespace vidbossa::kern {

namespace scalar {

uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords) {
    uint32_t sum = 0;
    for (size_t i = 0; i < nwords; ++i) {
        sum += static_cast<uint32_t>(std::popcount(a[i] ^ b[i]));
    }
    return sum;
}

void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out) {
    for (size_t i = 0; i < m; ++i) {
        out[i] = hamming(q, rows + i * nwords, nwords);
    }
}

void min_inplace(double* acc, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] = std::min(acc[i], x[i]);
}

void max_inplace(double* acc, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], x[i]);
}

void add_inplace(double* acc, const double* x, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] += x[i];
}

double l2_distance(const double* a, const double* b, size_t n) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double l1_distance(const double* a, const double* b, size_t n) {
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::fabs(a[i] - b[i]);
    return sum;
}

} // namespace scalar

namespace {

bool cpu_has_avx2() {
#if defined(VIDBOSSA_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

Backend resolve_backend() {
    const char* forced = std::getenv("VIDBOSSA_KERNEL");
    if (forced != nullptr) {
        const std::string name(forced);
        if (name == "scalar") return Backend::Scalar;
#if defined(VIDBOSSA_HAVE_AVX2_TU)
        if (name == "avx2" && cpu_has_avx2()) return Backend::Avx2;
#endif
#if defined(VIDBOSSA_HAVE_NEON_TU)
        if (name == "neon") return Backend::Neon;
#endif
        // Unusable request falls through to autodetection.
    }
#if defined(VIDBOSSA_HAVE_NEON_TU)
    return Backend::Neon;
#else
    if (cpu_has_avx2()) return Backend::Avx2;
    return Backend::Scalar;
#endif
}

} // namespace

Backend active_backend() {
    static const Backend b = resolve_backend();
    return b;
}

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::Scalar: return "scalar";
        case Backend::Avx2: return "avx2";
        case Backend::Neon: return "neon";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return cpu_has_avx2();
        case Backend::Neon:
#if defined(VIDBOSSA_HAVE_NEON_TU)
            return true;
#else
            return false;
#endif
    }
    return false;
}

uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords) {
    switch (active_backend()) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
        case Backend::Avx2: return avx2::hamming(a, b, nwords);
#endif
#if defined(VIDBOSSA_HAVE_NEON_TU)
        case Backend::Neon: return neon::hamming(a, b, nwords);
#endif
        default: return scalar::hamming(a, b, nwords);
    }
}

void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out) {
    switch (active_backend()) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
        case Backend::Avx2: return avx2::hamming_batch(q, rows, m, nwords, out);
#endif
#if defined(VIDBOSSA_HAVE_NEON_TU)
        case Backend::Neon: return neon::hamming_batch(q, rows, m, nwords, out);
#endif
        default: return scalar::hamming_batch(q, rows, m, nwords, out);
    }
}

void min_inplace(double* acc, const double* x, size_t n) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
    if (active_backend() == Backend::Avx2) return avx2::min_inplace(acc, x, n);
#endif
    scalar::min_inplace(acc, x, n);
}

void max_inplace(double* acc, const double* x, size_t n) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
    if (active_backend() == Backend::Avx2) return avx2::max_inplace(acc, x, n);
#endif
    scalar::max_inplace(acc, x, n);
}

void add_inplace(double* acc, const double* x, size_t n) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
    if (active_backend() == Backend::Avx2) return avx2::add_inplace(acc, x, n);
#endif
    scalar::add_inplace(acc, x, n);
}

double l2_distance(const double* a, const double* b, size_t n) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
    if (active_backend() == Backend::Avx2) return avx2::l2_distance(a, b, n);
#endif
    return scalar::l2_distance(a, b, n);
}

double l1_distance(const double* a, const double* b, size_t n) {
#if defined(VIDBOSSA_HAVE_AVX2_TU)
    if (active_backend() == Backend::Avx2) return avx2::l1_distance(a, b, n);
#endif
    return scalar::l1_distance(a, b, n);
}

} // namespace vidbossa::kern
