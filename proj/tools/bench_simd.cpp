// Throughput comparison of the scalar reference kernels against the
// runtime-dispatched variants.
#include "selfavg/simd.hpp"
#include "selfavg/simulator.hpp"

#include <chrono>
#include <cstdio>
#include <vector>

using namespace selfavg;

namespace {

template <typename F>
double time_per_call_ns(F&& f, int iters) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i) f();
    const auto dt = std::chrono::duration<double, std::nano>(
        std::chrono::steady_clock::now() - t0);
    return dt.count() / iters;
}

} // namespace

int main() {
    std::printf("dispatch level: %s\n\n", simd::level_name(simd::active_level()));

    const uint32_t pop = 4096;
    std::vector<uint32_t> targets(pop);
    std::vector<uint8_t> bytes(pop, 0);
    for (size_t i = 0; i < bytes.size(); i += 3) bytes[i] = 1;
    const size_t m = 4096;
    std::vector<double> a(m, 0.5), b(m, 0.25), q(m);

    struct Row {
        const char* name;
        double scalar_ns;
        double active_ns;
    };
    std::vector<Row> rows;

    rows.push_back({"gen_targets(4096)",
                    time_per_call_ns([&] { simd::scalar::gen_targets(1, 0, pop, targets.data()); }, 2000),
                    time_per_call_ns([&] { simd::gen_targets(1, 0, pop, targets.data()); }, 2000)});
    rows.push_back({"count_zero_bytes(4096)",
                    time_per_call_ns([&] { simd::scalar::count_zero_bytes(bytes.data(), pop); }, 20000),
                    time_per_call_ns([&] { simd::count_zero_bytes(bytes.data(), pop); }, 20000)});
    rows.push_back({"dot(4096)",
                    time_per_call_ns([&] { simd::scalar::dot(a.data(), b.data(), m); }, 20000),
                    time_per_call_ns([&] { simd::dot(a.data(), b.data(), m); }, 20000)});
    rows.push_back({"window_weights(4096)",
                    time_per_call_ns([&] { simd::scalar::window_weights(31.0, m, q.data()); }, 5000),
                    time_per_call_ns([&] { simd::window_weights(31.0, m, q.data()); }, 5000)});

    std::printf("%-24s %12s %12s %8s\n", "kernel", "scalar ns", "active ns", "speedup");
    for (const auto& r : rows)
        std::printf("%-24s %12.0f %12.0f %7.2fx\n", r.name, r.scalar_ns, r.active_ns,
                    r.scalar_ns / r.active_ns);

    TrialConfig cfg;
    cfg.kernel_name = "roulette";
    cfg.n_start = 100;
    cfg.trials = 200000;
    cfg.seed = 1;
    const auto t0 = std::chrono::steady_clock::now();
    const auto est = estimate_p(cfg);
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("\nestimate_p(n=100, 2e5 trials): %.2fs  (p_hat = %.6f)\n", s, est.p_hat);
    return 0;
}
