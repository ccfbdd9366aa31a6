// AVX2 variants. gen_targets and count_zero_bytes reproduce the scalar
// kernels bit-exactly; dot uses four accumulators (reassociated),
// window_weights performs the same per-element IEEE operations as scalar.

#include "selfavg/simd.hpp"
#include "selfavg/splitmix.hpp"

#include <immintrin.h>

namespace selfavg::simd::avx2 {

namespace {

// 64x64 -> low 64 multiply per lane via 32-bit pieces.
inline __m256i mul64(__m256i a, __m256i b) {
    const __m256i lo = _mm256_mul_epu32(a, b);
    const __m256i a_hi = _mm256_srli_epi64(a, 32);
    const __m256i b_hi = _mm256_srli_epi64(b, 32);
    const __m256i cross =
        _mm256_add_epi64(_mm256_mul_epu32(a_hi, b), _mm256_mul_epu32(a, b_hi));
    return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i splitmix_finalize(__m256i z) {
    const __m256i m1 = _mm256_set1_epi64x(static_cast<long long>(0xBF58476D1CE4E5B9ull));
    const __m256i m2 = _mm256_set1_epi64x(static_cast<long long>(0x94D049BB133111EBull));
    z = mul64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 30)), m1);
    z = mul64(_mm256_xor_si256(z, _mm256_srli_epi64(z, 27)), m2);
    return _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
}

} // namespace

void gen_targets(uint64_t base, uint64_t ctr0, uint32_t pop, uint32_t* targets) {
    const uint64_t range = pop - 1;
    const __m256i vrange = _mm256_set1_epi64x(static_cast<long long>(range));
    const __m256i gamma4 = _mm256_set1_epi64x(static_cast<long long>(4 * kSplitmixGamma));
    // state for lanes i..i+3: base + (ctr0+i+1+lane)*gamma
    __m256i state = _mm256_add_epi64(
        _mm256_set1_epi64x(static_cast<long long>(base + (ctr0 + 1) * kSplitmixGamma)),
        _mm256_set_epi64x(static_cast<long long>(3 * kSplitmixGamma),
                          static_cast<long long>(2 * kSplitmixGamma),
                          static_cast<long long>(1 * kSplitmixGamma), 0));
    __m256i idx = _mm256_set_epi64x(3, 2, 1, 0);
    const __m256i four = _mm256_set1_epi64x(4);
    const __m256i one = _mm256_set1_epi64x(1);

    uint32_t i = 0;
    alignas(32) uint64_t lanes[4];
    for (; i + 4 <= pop; i += 4) {
        const __m256i z = splitmix_finalize(state);
        const __m256i hi = _mm256_srli_epi64(z, 32);
        __m256i t = _mm256_srli_epi64(_mm256_mul_epu32(hi, vrange), 32);
        // t += (t >= idx)  <=>  t += !(idx > t)
        const __m256i lt = _mm256_cmpgt_epi64(idx, t);
        t = _mm256_add_epi64(t, _mm256_andnot_si256(lt, one));
        _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), t);
        targets[i + 0] = static_cast<uint32_t>(lanes[0]);
        targets[i + 1] = static_cast<uint32_t>(lanes[1]);
        targets[i + 2] = static_cast<uint32_t>(lanes[2]);
        targets[i + 3] = static_cast<uint32_t>(lanes[3]);
        state = _mm256_add_epi64(state, gamma4);
        idx = _mm256_add_epi64(idx, four);
    }
    for (; i < pop; ++i) {
        const uint64_t z = splitmix64_at(base, ctr0 + i);
        uint32_t t = static_cast<uint32_t>(((z >> 32) * range) >> 32);
        t += (t >= i);
        targets[i] = t;
    }
}

size_t count_zero_bytes(const uint8_t* bytes, size_t n) {
    const __m256i zero = _mm256_setzero_si256();
    size_t c = 0;
    size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bytes + i));
        const __m256i eq = _mm256_cmpeq_epi8(v, zero);
        c += static_cast<size_t>(__builtin_popcount(
            static_cast<unsigned>(_mm256_movemask_epi8(eq))));
    }
    for (; i < n; ++i) c += (bytes[i] == 0);
    return c;
}

double dot(const double* a, const double* b, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc0);
    double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void window_weights(double tau, size_t m, double* q) {
    const double tau2 = tau * tau;
    const __m256d vtau = _mm256_set1_pd(tau);
    const __m256d vtau2 = _mm256_set1_pd(tau2);
    size_t k = 0;
    double g_prev = 1.0;
    alignas(32) double gs[4];
    for (; k + 4 <= m; k += 4) {
        const __m256d kk = _mm256_set_pd(static_cast<double>(k + 4), static_cast<double>(k + 3),
                                         static_cast<double>(k + 2), static_cast<double>(k + 1));
        const __m256d d = _mm256_add_pd(vtau, kk);
        const __m256d g = _mm256_div_pd(vtau2, _mm256_mul_pd(d, d));
        _mm256_store_pd(gs, g);
        q[k] = g_prev - gs[0];
        q[k + 1] = gs[0] - gs[1];
        q[k + 2] = gs[1] - gs[2];
        q[k + 3] = gs[2] - gs[3];
        g_prev = gs[3];
    }
    for (; k < m; ++k) {
        const double d = tau + static_cast<double>(k + 1);
        const double g = tau2 / (d * d);
        q[k] = g_prev - g;
        g_prev = g;
    }
}

} // namespace selfavg::simd::avx2
