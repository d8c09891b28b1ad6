#pragma once

// Hot loops get an AVX2 clone picked at load time. FMA stays off, so every
// clone produces the same bits.
#if defined(__GNUC__) && defined(__x86_64__) && defined(__linux__)
#define FPE_VECTOR_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define FPE_VECTOR_CLONES
#endif
