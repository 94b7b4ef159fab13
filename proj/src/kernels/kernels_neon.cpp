// Copyright the vidbossa authors. Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
// aarch64 only; vcnt/vaddv are baseline NEON so no extra compile flags.
#include "vidbossa/kernels.hpp"

#include <arm_neon.h>

namespace vidbossa::kern::neon {

uint32_t hamming(const uint64_t* a, const uint64_t* b, size_t nwords) {
    uint32_t sum = 0;
    size_t i = 0;
    for (; i + 2 <= nwords; i += 2) {
        const uint8x16_t va = vld1q_u8(reinterpret_cast<const uint8_t*>(a + i));
        const uint8x16_t vb = vld1q_u8(reinterpret_cast<const uint8_t*>(b + i));
        sum += vaddvq_u8(vcntq_u8(veorq_u8(va, vb)));
    }
    for (; i < nwords; ++i) {
        sum += static_cast<uint32_t>(__builtin_popcountll(a[i] ^ b[i]));
    }
    return sum;
}

void hamming_batch(const uint64_t* q, const uint64_t* rows, size_t m, size_t nwords,
                   uint32_t* out) {
    for (size_t i = 0; i < m; ++i) {
        out[i] = hamming(q, rows + i * nwords, nwords);
    }
}

} // namespace vidbossa::kern::neon
