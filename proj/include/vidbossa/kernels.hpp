// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops with scalar reference implementations and SIMD
// variants selected once at startup. The scalar kernels are the semantic
// ground truth; every SIMD variant is equivalence-tested against them.
//
// Backend resolution order:
//   1. VIDBOSSA_KERNEL env var ("scalar", "avx2", "neon") if set and usable
//   2. best instruction set reported by the CPU
//   3. scalar
//
// Integer kernels (hamming) and min/max are bit-identical across backends.
// Floating-point reductions (l1/l2 distance) may differ in the last ulp
// between backends because lane-wise accumulation reorders the sums; within
// one process the backend is fixed, so results stay reproducible.

namespace vidbossa::kern {

enum class Backend { Scalar, Avx2, Neon };

Backend active_backend();
const char* backend_name(Backend b);

/// Hamming distance between two packed bitstrings of `nwords` 64-bit words.
uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords);

/// Distances from one query to `m` rows stored contiguously (row-major,
/// `nwords` words each). out[i] = hamming(q, rows + i*nwords).
void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out);

// Elementwise across-array reductions used by frame aggregation.
void min_inplace(double* acc, const double* x, size_t n);
void max_inplace(double* acc, const double* x, size_t n);
void add_inplace(double* acc, const double* x, size_t n);

// Dense vector distances used by the SVM kernel matrix.
double l2_distance(const double* a, const double* b, size_t n);
double l1_distance(const double* a, const double* b, size_t n);

// Reference kernels, exposed for equivalence tests and as the fallback.
namespace scalar {
uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords);
void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out);
void min_inplace(double* acc, const double* x, size_t n);
void max_inplace(double* acc, const double* x, size_t n);
void add_inplace(double* acc, const double* x, size_t n);
double l2_distance(const double* a, const double* b, size_t n);
double l1_distance(const double* a, const double* b, size_t n);
} // namespace scalar

#if defined(VIDBOSSA_HAVE_AVX2_TU)
namespace avx2 {
uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords);
void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out);
void min_inplace(double* acc, const double* x, size_t n);
void max_inplace(double* acc, const double* x, size_t n);
void add_inplace(double* acc, const double* x, size_t n);
double l2_distance(const double* a, const double* b, size_t n);
double l1_distance(const double* a, const double* b, size_t n);
} // namespace avx2
#endif

#if defined(VIDBOSSA_HAVE_NEON_TU)
namespace neon {
uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords);
void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out);
} // namespace neon
#endif

/// True when the named backend can run on this machine (compiled in and
/// supported by the CPU).
bool backend_available(Backend b);

} // namespace vidbossa::kern
