#pragma once
// Transition kernels Y(n): probability rows, closed-form moments where they
// exist, drift-parameter verification, and the kill-subset recursion for the
// group Russian roulette kernel.

#include "selfavg/bigfloat.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace selfavg {

// (alpha, beta, gamma, delta, p): |E[Y(n)] - alpha*n| <= beta and
// Var(Y(n)) <= gamma*n^p + delta.
struct DriftParameters {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double delta = 0.0;
    double p_exponent = 1.0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw std::invalid_argument("DriftParameters: alpha must be in (0,1)");
        if (beta < 0.0 || gamma < 0.0 || delta < 0.0)
            throw std::invalid_argument("DriftParameters: beta, gamma, delta must be >= 0");
        if (!(p_exponent >= 1.0 && p_exponent < 2.0))
            throw std::invalid_argument("DriftParameters: p_exponent must be in [1,2)");
    }
};

struct PrecisionConfig {
    long initial_bits = 256;  // nominal (storage) precision of results
    long max_bits = 4096;     // hard cap on working precision
    double normalization_tol = 1e-20;
    int escalation_factor = 2;
};

// Raised when a row cannot meet its residual gates within max_bits.
class PrecisionError : public std::runtime_error {
  public:
    PrecisionError(long n, long bits, const std::string& what)
        : std::runtime_error(what), n(n), bits(bits) {}
    long n;
    long bits;
};

// Residuals recorded for one probability row, as log-scale-friendly doubles.
struct RowCheck {
    double norm_resid = 0.0;   // |sum w - 1|
    double m1_resid = 0.0;     // relative first-moment residual vs closed form
    double m2_resid = 0.0;     // relative second-moment residual vs closed form
    double min_entry = 0.0;    // most negative entry before clamping
    double spot_resid = 0.0;   // dual-route check, binom-weighted (roulette)
    long working_bits = 0;
    double max_resid() const;
};

// q_{n,k}: probability that one fixed k-subset is exactly the set killed.
struct KillSubsetRow {
    long n = 0;
    std::vector<BigFloat> q; // index 0..n; q[0] = q[1] = 0
    RowCheck check;
};

// One-step distribution of Y(n); w[j] = P(Y(n) = j), j = 0..n.
// The parity example puts mass on j = n (outside the standard support);
// such rows carry support_violation = true instead of being renormalized.
struct PmfRow {
    long n = 0;
    std::vector<BigFloat> w;
    bool support_violation = false;
    RowCheck check;
};

class TransitionKernel {
  public:
    virtual ~TransitionKernel() = default;

    virtual std::string name() const = 0;
    // Largest index with prescribed starting values; Y(n) = n for n <= n0.
    virtual long n0() const = 0;
    virtual double boundary_value(long n) const = 0;
    // Probability row of Y(n) for n > n0, computed so that the returned
    // weights are accurate to ~2^-(initial_bits/2) (escalating on failure).
    virtual PmfRow pmf_row(long n, const PrecisionConfig& cfg) const = 0;
    // Exact E[Y(n)] and E[Y(n)^2] when a closed form exists.
    virtual bool closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                                     BigFloat& second_moment) const {
        (void)n; (void)bits; (void)mean; (void)second_moment;
        return false;
    }
    // Extra working bits needed at index n (cancellation growth).
    virtual double precision_overhead_bits(long n) const { (void)n; return 32.0; }
    virtual std::optional<DriftParameters> default_drift() const { return std::nullopt; }
};

class RouletteKernel final : public TransitionKernel {
  public:
    std::string name() const override { return "roulette"; }
    long n0() const override { return 1; }
    double boundary_value(long n) const override { return n == 0 ? 1.0 : 0.0; }

    // mu_n = n (1 - 1/(n-1))^(n-1)
    static double mu(long n);
    // sigma_n^2 = mu_n - mu_n^2 + (n^2-n)(1 - 1/(n-1))^2 (1 - 2/(n-1))^(n-2)
    static double sigma2(long n);
    static void mu_big(long n, BigFloat& out);
    static void second_moment_big(long n, BigFloat& out);

    KillSubsetRow kill_subset_row(long n, const PrecisionConfig& cfg) const;

    PmfRow pmf_row(long n, const PrecisionConfig& cfg) const override;
    bool closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                             BigFloat& second_moment) const override;
    double precision_overhead_bits(long n) const override {
        return 0.70 * static_cast<double>(n) + 48.0;
    }
    std::optional<DriftParameters> default_drift() const override;
};

// The periodic counterexample: Y(n) = 2 Bin(n/2, 1/2) for even n,
// 2 Bin((n-1)/2, 1/2) + 1 for odd n. Mass lands on j = n (flagged).
class ParityKernel final : public TransitionKernel {
  public:
    std::string name() const override { return "parity"; }
    long n0() const override { return 1; }
    double boundary_value(long n) const override { return n == 1 ? 1.0 : 0.0; }
    PmfRow pmf_row(long n, const PrecisionConfig& cfg) const override;
    bool closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                             BigFloat& second_moment) const override;
    std::optional<DriftParameters> default_drift() const override {
        return DriftParameters{0.5, 0.5, 0.5, 0.0, 1.0};
    }
};

// Loser selection by coin flipping: Y(n) ~ Bin(n, 1/2) conditioned on != n
// (an all-tails round repeats the state and collapses by memorylessness).
class CoinflipKernel final : public TransitionKernel {
  public:
    std::string name() const override { return "coinflip"; }
    long n0() const override { return 1; }
    double boundary_value(long n) const override { return n == 0 ? 1.0 : 0.0; }
    PmfRow pmf_row(long n, const PrecisionConfig& cfg) const override;
    bool closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                             BigFloat& second_moment) const override;
    std::optional<DriftParameters> default_drift() const override {
        return DriftParameters{0.5, 0.5, 0.3, 0.25, 1.0};
    }
};

// Programmatic kernel: supply the row function directly.
class CustomKernel final : public TransitionKernel {
  public:
    using RowFn = std::function<void(long n, mpfr_prec_t bits, std::vector<BigFloat>& w)>;

    CustomKernel(std::string name, long n0, std::vector<double> boundary, RowFn row)
        : name_(std::move(name)), n0_(n0), boundary_(std::move(boundary)),
          row_(std::move(row)) {}

    std::string name() const override { return name_; }
    long n0() const override { return n0_; }
    double boundary_value(long n) const override { return boundary_.at(static_cast<size_t>(n)); }
    PmfRow pmf_row(long n, const PrecisionConfig& cfg) const override;
    double precision_overhead_bits(long n) const override { (void)n; return overhead_; }
    void set_precision_overhead(double bits) { overhead_ = bits; }
    void set_drift(DriftParameters d) { drift_ = d; }
    std::optional<DriftParameters> default_drift() const override { return drift_; }

  private:
    std::string name_;
    long n0_;
    std::vector<double> boundary_;
    RowFn row_;
    double overhead_ = 32.0;
    std::optional<DriftParameters> drift_;
};

// Kernel selection by name ("roulette", "coinflip", "parity", or registered).
std::unique_ptr<TransitionKernel> make_kernel(const std::string& name);
void register_kernel(const std::string& name,
                     std::function<std::unique_ptr<TransitionKernel>()> factory);

struct DriftReportEntry {
    long n = 0;
    double mean = 0.0;
    double variance = 0.0;
    bool mean_ok = false;
    bool var_ok = false;
};

struct DriftReport {
    DriftParameters params;
    std::vector<DriftReportEntry> entries;
    bool all_pass = true;
};

// Checks |E[Y(n)] - alpha n| <= beta and Var(Y(n)) <= gamma n^p + delta for
// every n in [n_lo, n_hi], from exact pmf rows. Failures are entries, not
// exceptions.
DriftReport verify_drift(const TransitionKernel& kernel, const DriftParameters& params,
                         long n_lo, long n_hi, const PrecisionConfig& cfg = {});

} // namespace selfavg
