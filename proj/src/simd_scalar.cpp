#include "selfavg/simd.hpp"
#include "selfavg/splitmix.hpp"

namespace selfavg::simd::scalar {

void gen_targets(uint64_t base, uint64_t ctr0, uint32_t pop, uint32_t* targets) {
    const uint64_t range = pop - 1; // victim drawn from {0..pop-2}, then shifted past self
    for (uint32_t i = 0; i < pop; ++i) {
        const uint64_t z = splitmix64_at(base, ctr0 + i);
        uint32_t t = static_cast<uint32_t>(((z >> 32) * range) >> 32);
        t += (t >= i);
        targets[i] = t;
    }
}

size_t count_zero_bytes(const uint8_t* bytes, size_t n) {
    size_t c = 0;
    for (size_t i = 0; i < n; ++i) c += (bytes[i] == 0);
    return c;
}

double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void window_weights(double tau, size_t m, double* q) {
    const double tau2 = tau * tau;
    double g_prev = 1.0; // tau^2/(tau+0)^2
    for (size_t k = 0; k < m; ++k) {
        const double d = tau + static_cast<double>(k + 1);
        const double g = tau2 / (d * d);
        q[k] = g_prev - g;
        g_prev = g;
    }
}

} // namespace selfavg::simd::scalar
