#pragma once
// Runtime-dispatched data-parallel kernels with scalar reference
// implementations. The integer kernels (target generation, byte counting)
// are bit-identical across variants; the floating-point reductions may
// differ by reassociation within documented ULP tolerances.

#include <cstddef>
#include <cstdint>

namespace selfavg::simd {

enum class Level { scalar, avx2 };

Level active_level();
const char* level_name(Level level);
bool level_supported(Level level);
// Pins the dispatch (tests, benchmarking). Throws if unsupported on this CPU.
void force_level(Level level);

// targets[i] = shooter i's victim in {0..pop-1}\{i}, from stream positions
// ctr0..ctr0+pop-1 of the counter-based splitmix64 stream.
extern void (*gen_targets)(uint64_t base, uint64_t ctr0, uint32_t pop, uint32_t* targets);
// number of zero bytes (survivors) in hits[0..n)
extern size_t (*count_zero_bytes)(const uint8_t* bytes, size_t n);
// sum_i a[i] * b[i]
extern double (*dot)(const double* a, const double* b, size_t n);
// q[k] = tau^2/(tau+k)^2 - tau^2/(tau+k+1)^2 for k = 0..m-1
extern void (*window_weights)(double tau, size_t m, double* q);

namespace scalar {
void gen_targets(uint64_t base, uint64_t ctr0, uint32_t pop, uint32_t* targets);
size_t count_zero_bytes(const uint8_t* bytes, size_t n);
double dot(const double* a, const double* b, size_t n);
void window_weights(double tau, size_t m, double* q);
} // namespace scalar

#if defined(SELFAVG_HAVE_AVX2_TU)
namespace avx2 {
void gen_targets(uint64_t base, uint64_t ctr0, uint32_t pop, uint32_t* targets);
size_t count_zero_bytes(const uint8_t* bytes, size_t n);
double dot(const double* a, const double* b, size_t n);
void window_weights(double tau, size_t m, double* q);
} // namespace avx2
#endif

} // namespace selfavg::simd
