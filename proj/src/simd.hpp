#pragma once

// Hot loops are compiled twice, for AVX2 and for the baseline ISA, and the
// loader picks one at startup. Both clones run the same lane-ordered
// arithmetic without FMA contraction, so results do not depend on the CPU.
#if defined(__x86_64__) && defined(__GNUC__) && defined(__linux__)
#define LFPS_MULTIVERSION __attribute__((target_clones("avx2", "default")))
#else
#define LFPS_MULTIVERSION
#endif

#define LFPS_ALWAYS_INLINE __attribute__((always_inline)) inline
