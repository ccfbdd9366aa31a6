#pragma once
// Builds p(0..n_max) by the self-averaging recursion p(n) = E[p(Y(n))] at
// adaptive high precision, plus the exact pushforward operator for the
// round process X_k and the martingale self-check E[p(X_k)] = p(n).

#include "selfavg/bigfloat.hpp"
#include "selfavg/kernels.hpp"

#include <functional>
#include <string>
#include <vector>

namespace selfavg {

struct SequenceTable {
    std::string kernel_name;
    long n_max = 0;
    long precision_bits = 0;       // storage precision of values
    std::vector<BigFloat> values;  // p(0..n_max)
    std::vector<double> residuals; // max row residual per n (0 on boundary rows)
    std::vector<long> row_bits;    // working precision used per row
    bool support_violation = false;

    double value(long n) const { return values[static_cast<size_t>(n)].to_double(); }
    std::vector<double> values_double() const;
    double residual_max() const;
};

struct BuildOptions {
    int threads = 0;           // <= 0: all available
    long checkpoint_every = 0; // rows between checkpoint callbacks; 0 = off
    std::function<void(const SequenceTable&, long n_done)> on_checkpoint;
    std::function<void(long n_done, long n_max)> on_progress;
    const SequenceTable* resume_from = nullptr; // prefix to reuse (same kernel/precision)
};

SequenceTable build_table(const TransitionKernel& kernel, long n_max,
                          const PrecisionConfig& cfg = {}, const BuildOptions& opts = {});

struct ResidualReport {
    double max_resid = 0.0;
    long argmax_n = -1;
    long max_row_bits = 0;
};
ResidualReport table_residual_report(const SequenceTable& table);

// Exact law of X_k = Y(X_{k-1}) with X_0 a point mass; states <= n0 are
// absorbing. Rows are built once up to n_limit and shared.
class PushforwardOperator {
  public:
    PushforwardOperator(const TransitionKernel& kernel, long n_limit,
                        const PrecisionConfig& cfg = {}, mpfr_prec_t vector_bits = 256,
                        int threads = 0);

    long limit() const { return limit_; }
    mpfr_prec_t bits() const { return bits_; }

    // law of X_k with X_0 = n, as a vector over {0..n}
    std::vector<BigFloat> law(long n, long k_rounds) const;

    // one backward step: g(m) := E[f(Y(m))] for m > n0, g(m) = f(m) otherwise.
    // After k applications, g(n) = E[f(X_k) | X_0 = n] for every n at once.
    std::vector<BigFloat> apply_backward(const std::vector<BigFloat>& f) const;

  private:
    long n0_;
    long limit_;
    mpfr_prec_t bits_;
    std::vector<std::vector<BigFloat>> rows_; // index m in (n0, limit]
};

// One-shot law of X_k with the configured limit guard.
std::vector<BigFloat> pushforward_distribution(const TransitionKernel& kernel, long n,
                                               long k_rounds, const PrecisionConfig& cfg = {},
                                               long limit = 500);

struct MartingaleEntry {
    long k = 0;
    double expectation = 0.0; // E[p(X_k)]
    double deviation = 0.0;   // |E[p(X_k)] - p(n)|
};
struct MartingaleReport {
    long n = 0;
    std::vector<MartingaleEntry> entries;
    double max_deviation = 0.0;
};
MartingaleReport martingale_check(const SequenceTable& table, const PushforwardOperator& op,
                                  long n, long k_max);

} // namespace selfavg
