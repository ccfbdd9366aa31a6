#include "selfavg/simulator.hpp"

#include "selfavg/simd.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace selfavg {

void TrialConfig::validate() const {
    if (trials < 1) throw std::invalid_argument("TrialConfig: trials must be >= 1");
    if (n_start < 0) throw std::invalid_argument("TrialConfig: n_start must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrialConfig: batch_size must be >= 1");
}

namespace {

uint64_t batch_stream_base(uint64_t seed, uint64_t batch) {
    return splitmix64_at(seed, batch);
}

struct RoundBuffers {
    std::vector<uint32_t> targets;
    std::vector<uint8_t> hits;
    void reserve(long n) {
        targets.resize(static_cast<size_t>(n));
        hits.resize(static_cast<size_t>(n));
    }
};

long roulette_round(long population, SplitMixStream& stream, RoundBuffers& buf) {
    const uint32_t pop = static_cast<uint32_t>(population);
    buf.reserve(population);
    simd::gen_targets(stream.base(), stream.counter(), pop, buf.targets.data());
    stream.skip(pop);
    std::memset(buf.hits.data(), 0, pop);
    for (uint32_t i = 0; i < pop; ++i) buf.hits[buf.targets[i]] = 1;
    return static_cast<long>(simd::count_zero_bytes(buf.hits.data(), pop));
}

// Count of tails among `n` fair coins from the stream.
long coin_tails(long n, SplitMixStream& stream) {
    long tails = 0;
    long left = n;
    while (left > 0) {
        const int take = static_cast<int>(std::min<long>(left, 64));
        uint64_t z = stream.next();
        if (take < 64) z &= (UINT64_C(1) << take) - 1;
        tails += std::popcount(z);
        left -= take;
    }
    return tails;
}

long coinflip_step(long state, SplitMixStream& stream) {
    // tails continue; an all-tails round repeats the state (resampled here)
    while (true) {
        const long tails = coin_tails(state, stream);
        if (tails != state) return tails;
    }
}

long parity_step(long state, SplitMixStream& stream) {
    if (state % 2 == 0) return 2 * coin_tails(state / 2, stream);
    return 2 * coin_tails((state - 1) / 2, stream) + 1;
}

enum class Mech { roulette, coinflip, parity };

Mech mech_of(const std::string& name) {
    if (name == "roulette") return Mech::roulette;
    if (name == "coinflip") return Mech::coinflip;
    if (name == "parity") return Mech::parity;
    throw std::invalid_argument("simulator: no mechanistic process for kernel: " + name);
}

long step(Mech m, long state, SplitMixStream& stream, RoundBuffers& buf) {
    switch (m) {
        case Mech::roulette: return roulette_round(state, stream, buf);
        case Mech::coinflip: return coinflip_step(state, stream);
        case Mech::parity: return parity_step(state, stream);
    }
    return 0;
}

struct BatchTally {
    double boundary_sum = 0.0;
    std::map<long, long> absorption;
    std::map<long, long> rounds;
    void merge(const BatchTally& o) {
        boundary_sum += o.boundary_sum;
        for (auto& [k, v] : o.absorption) absorption[k] += v;
        for (auto& [k, v] : o.rounds) rounds[k] += v;
    }
};

} // namespace

long simulate_roulette_round(long population, SplitMixStream& stream) {
    if (population < 2) throw std::domain_error("simulate_roulette_round: population must be >= 2");
    RoundBuffers buf;
    return roulette_round(population, stream, buf);
}

long mechanistic_step(const std::string& kernel_name, long state, SplitMixStream& stream) {
    if (state < 2) throw std::domain_error("mechanistic_step: state must be >= 2");
    RoundBuffers buf;
    return step(mech_of(kernel_name), state, stream, buf);
}

ProcessTrace simulate_process(const TrialConfig& cfg) {
    cfg.validate();
    const Mech m = mech_of(cfg.kernel_name);
    const auto kernel = make_kernel(cfg.kernel_name);
    const long n0 = kernel->n0();
    SplitMixStream stream(batch_stream_base(cfg.seed, 0));
    RoundBuffers buf;
    ProcessTrace trace;
    long state = cfg.n_start;
    trace.states.push_back(state);
    while (state > n0) {
        state = step(m, state, stream, buf);
        trace.states.push_back(state);
    }
    return trace;
}

EstimateResult estimate_p(const TrialConfig& cfg) {
    cfg.validate();
    const Mech m = mech_of(cfg.kernel_name);
    const auto kernel = make_kernel(cfg.kernel_name);
    const long n0 = kernel->n0();
    const long batches = (cfg.trials + cfg.batch_size - 1) / cfg.batch_size;
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();

    std::vector<BatchTally> tallies(static_cast<size_t>(batches));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long b = 0; b < batches; ++b) {
        SplitMixStream stream(batch_stream_base(cfg.seed, static_cast<uint64_t>(b)));
        RoundBuffers buf;
        BatchTally tally;
        const long lo = b * cfg.batch_size;
        const long hi = std::min(cfg.trials, lo + cfg.batch_size);
        for (long t = lo; t < hi; ++t) {
            long state = cfg.n_start;
            long rounds = 0;
            while (state > n0) {
                state = step(m, state, stream, buf);
                ++rounds;
            }
            tally.boundary_sum += kernel->boundary_value(state);
            tally.absorption[state] += 1;
            tally.rounds[rounds] += 1;
        }
        tallies[static_cast<size_t>(b)] = std::move(tally);
    }

    BatchTally total;
    for (auto& t : tallies) total.merge(t);

    EstimateResult r;
    r.kernel_name = cfg.kernel_name;
    r.n_start = cfg.n_start;
    r.trials = cfg.trials;
    r.seed = cfg.seed;
    r.p_hat = total.boundary_sum / static_cast<double>(cfg.trials);
    r.std_error = std::sqrt(std::max(0.0, r.p_hat * (1.0 - r.p_hat)) /
                            static_cast<double>(cfg.trials));
    r.absorption_histogram = std::move(total.absorption);
    r.rounds_histogram = std::move(total.rounds);
    return r;
}

MomentsEstimate estimate_moments(const std::string& kernel_name, long n, long trials,
                                 uint64_t seed, int threads) {
    if (n < 2) throw std::domain_error("estimate_moments: n must be >= 2");
    if (trials < 2) throw std::invalid_argument("estimate_moments: trials must be >= 2");
    const Mech m = mech_of(kernel_name);
    const long batch_size = 4096;
    const long batches = (trials + batch_size - 1) / batch_size;
    const int nt = threads > 0 ? threads : omp_get_max_threads();

    std::vector<long double> sums(static_cast<size_t>(batches)), sqs(static_cast<size_t>(batches));
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
    for (long b = 0; b < batches; ++b) {
        SplitMixStream stream(batch_stream_base(seed, static_cast<uint64_t>(b)));
        RoundBuffers buf;
        long double s = 0, s2 = 0;
        const long lo = b * batch_size;
        const long hi = std::min(trials, lo + batch_size);
        for (long t = lo; t < hi; ++t) {
            const long y = step(m, n, stream, buf);
            const long double yd = static_cast<long double>(y);
            s += yd;
            s2 += yd * yd;
        }
        sums[static_cast<size_t>(b)] = s;
        sqs[static_cast<size_t>(b)] = s2;
    }
    long double s = 0, s2 = 0;
    for (long b = 0; b < batches; ++b) {
        s += sums[static_cast<size_t>(b)];
        s2 += sqs[static_cast<size_t>(b)];
    }
    const long double T = static_cast<long double>(trials);
    const long double mean = s / T;
    const long double var = (s2 - T * mean * mean) / (T - 1);

    MomentsEstimate r;
    r.trials = trials;
    r.mean = static_cast<double>(mean);
    r.variance = static_cast<double>(var);
    r.mean_std_error = static_cast<double>(std::sqrt(var / static_cast<double>(trials)));
    // normal-theory approximation for SE of the sample variance
    r.var_std_error =
        static_cast<double>(var) * std::sqrt(2.0 / (static_cast<double>(trials) - 1.0));
    return r;
}

long sample_from_cdf(const std::vector<double>& cdf, double u01) {
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u01);
    if (it == cdf.end()) return static_cast<long>(cdf.size()) - 1;
    return static_cast<long>(it - cdf.begin());
}

std::vector<double> cdf_from_pmf(const std::vector<double>& pmf) {
    std::vector<double> cdf(pmf.size());
    double acc = 0.0;
    for (size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        cdf[i] = acc;
    }
    if (!cdf.empty()) cdf.back() = std::max(cdf.back(), 1.0);
    return cdf;
}

} // namespace selfavg
