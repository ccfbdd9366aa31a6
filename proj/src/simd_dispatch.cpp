#include "selfavg/simd.hpp"

#include <stdexcept>

namespace selfavg::simd {

// Constant-initialized to the scalar reference; rebound at startup (and by
// force_level) according to CPU support.
void (*gen_targets)(uint64_t, uint64_t, uint32_t, uint32_t*) = &scalar::gen_targets;
size_t (*count_zero_bytes)(const uint8_t*, size_t) = &scalar::count_zero_bytes;
double (*dot)(const double*, const double*, size_t) = &scalar::dot;
void (*window_weights)(double, size_t, double*) = &scalar::window_weights;

namespace {

Level detect() {
#if defined(SELFAVG_HAVE_AVX2_TU)
    if (__builtin_cpu_supports("avx2")) return Level::avx2;
#endif
    return Level::scalar;
}

void bind(Level level) {
#if defined(SELFAVG_HAVE_AVX2_TU)
    if (level == Level::avx2) {
        gen_targets = &avx2::gen_targets;
        count_zero_bytes = &avx2::count_zero_bytes;
        dot = &avx2::dot;
        window_weights = &avx2::window_weights;
        return;
    }
#endif
    (void)level;
    gen_targets = &scalar::gen_targets;
    count_zero_bytes = &scalar::count_zero_bytes;
    dot = &scalar::dot;
    window_weights = &scalar::window_weights;
}

struct Init {
    Level level = detect();
    Init() { bind(level); }
};
Init g_init;

} // namespace

Level active_level() { return g_init.level; }

const char* level_name(Level level) {
    switch (level) {
        case Level::avx2: return "avx2";
        case Level::scalar: return "scalar";
    }
    return "unknown";
}

bool level_supported(Level level) {
    if (level == Level::scalar) return true;
#if defined(SELFAVG_HAVE_AVX2_TU)
    if (level == Level::avx2) return __builtin_cpu_supports("avx2") != 0;
#endif
    return false;
}

void force_level(Level level) {
    if (!level_supported(level))
        throw std::runtime_error(std::string("simd: level not supported on this CPU: ") +
                                 level_name(level));
    g_init.level = level;
    bind(level);
}

} // namespace selfavg::simd
