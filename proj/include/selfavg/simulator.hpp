#pragma once
// Mechanistic Monte Carlo of the elimination processes -- an oracle
// independent of the pmf/recursion pipeline. Deterministic given
// (seed, trials, batch_size) regardless of thread count: batches own
// counter-based splitmix64 streams and merge commutatively.

#include "selfavg/kernels.hpp"
#include "selfavg/splitmix.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace selfavg {

struct TrialConfig {
    std::string kernel_name = "roulette";
    long n_start = 0;
    long trials = 1;
    uint64_t seed = 0;
    long batch_size = 1024;
    int threads = 0; // <= 0: all available

    void validate() const;
};

struct ProcessTrace {
    std::vector<long> states; // X_0, X_1, ..., X_T with X_T <= n0
};

// One round of shooting among `population` players; returns the number of
// players not hit by anyone. Consumes `population` stream positions.
long simulate_roulette_round(long population, SplitMixStream& stream);

// One transition of the named kernel's mechanistic process (coin flips for
// coinflip/parity, shooting for roulette).
long mechanistic_step(const std::string& kernel_name, long state, SplitMixStream& stream);

// The trace of trial 0 of the configured run.
ProcessTrace simulate_process(const TrialConfig& cfg);

struct EstimateResult {
    std::string kernel_name;
    long n_start = 0;
    long trials = 0;
    uint64_t seed = 0;
    double p_hat = 0.0;
    double std_error = 0.0;
    std::map<long, long> absorption_histogram; // final state -> count
    std::map<long, long> rounds_histogram;     // rounds to absorption -> count
};
// Fraction of trials absorbing with boundary value 1 (state 0 for roulette),
// with binomial standard error.
EstimateResult estimate_p(const TrialConfig& cfg);

struct MomentsEstimate {
    double mean = 0.0;
    double variance = 0.0;
    double mean_std_error = 0.0;
    double var_std_error = 0.0;
    long trials = 0;
};
// Sample mean/variance of one-round survivor counts Y(n).
MomentsEstimate estimate_moments(const std::string& kernel_name, long n, long trials,
                                 uint64_t seed, int threads = 0);

// Inverse-CDF sampling from an explicit pmf (for cross-checking the
// mechanistic rounds against the exact rows).
long sample_from_cdf(const std::vector<double>& cdf, double u01);
std::vector<double> cdf_from_pmf(const std::vector<double>& pmf);

} // namespace selfavg
