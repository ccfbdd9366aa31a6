#pragma once
// Contraction constants, the Chebyshev envelope l(x)/u(x) bounding the whole
// subsequence p([alpha^-i x]), the period scan producing rigorous
// liminf/limsup bands, and the generalized (variance ~ n^p, p < 2) search.

#include "selfavg/kernels.hpp"
#include "selfavg/recursion.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace selfavg {

class EnvelopeRangeError : public std::runtime_error {
  public:
    EnvelopeRangeError(double required_n_max, const std::string& what)
        : std::runtime_error(what), required_n_max(required_n_max) {}
    double required_n_max;
};

struct ContractionConstants {
    double K = 0.0;
    double C = 0.0;
    double D = 0.0;
    DriftParameters drift;

    double tau(double x) const; // sqrt(C (x + alpha/2) + D)
    double t(double x) const;   // tau + beta/(1-alpha) + 1/2
};

// Feasibility threshold K > beta^2 / (alpha^2 - alpha^3) for p = 1.
double contraction_K_threshold(const DriftParameters& drift);
// Minimal (C, D) solving the inductive inequalities for p = 1.
ContractionConstants contraction_constants(const DriftParameters& drift, double K);

// Threshold K > beta^2 / (alpha^2 - alpha^(4-p)) for p in (1, 2).
double generalized_K_threshold(const DriftParameters& drift);
// Numeric minimal (C, D) for the generalized bound Var(X_k) <= C alpha^(kp) X_0^p + D.
ContractionConstants generalized_constants_search(const DriftParameters& drift, double K,
                                                  int max_iterations = 256);

enum class TieRule { away_from_zero, to_even };
long round_index(double x, TieRule rule = TieRule::away_from_zero);

struct TableView {
    const double* p = nullptr;
    long n_max = 0;
    double at(long n) const { return p[n]; }
};

struct EnvelopeResult {
    double x = 0.0;
    double tau = 0.0;
    double t = 0.0;
    long M = 0;          // truncation: windows 0..M-1 fit inside the table
    double lower = 0.0;  // l(x)
    double upper = 0.0;  // u(x)
    double tail_mass = 0.0;
    std::vector<double> weights; // q_0 .. q_{M-1} (optional)
};

// side selects window boundary inclusion at integer crossings:
// -1 evaluates the limit from below in x, +1 from above, 0 the point itself.
EnvelopeResult envelope_at(double x, const TableView& table, const ContractionConstants& c,
                           int side = 0, bool keep_weights = false);

struct ContainmentEntry {
    long i = 0;
    long N_i = 0;
    double p = 0.0;
    bool ok = false;
};
struct ContainmentReport {
    double x = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<ContainmentEntry> entries;
    bool all_ok = true;
};
// Checks l(x) <= p(N_i) <= u(x) for every N_i = [alpha^-i x] inside the table.
ContainmentReport subsequence_containment(double x, const TableView& table,
                                          const ContractionConstants& c,
                                          TieRule rule = TieRule::away_from_zero);

struct PeriodScanResult {
    double x0 = 0.0;
    double grid_step = 0.0;
    double liminf_lower = 0.0; // inf l over the period (rigorous via events)
    double liminf_upper = 0.0; // min u
    double limsup_lower = 0.0; // max l
    double limsup_upper = 0.0; // sup u
    double argmax_l = 0.0;
    double argmin_u = 0.0;
    long evaluations = 0;
    bool certified_nonconvergent = false; // limsup_lower > liminf_upper
    double gap = 0.0;                     // limsup_lower - liminf_upper
};
// Scans one multiplicative period [x0, x0/alpha]. The inf/sup are exact for
// the continuum: between integer-crossing events l and u are monotone in
// tau(x), so evaluating both one-sided limits at every event suffices.
PeriodScanResult scan_period(double x0, const TableView& table, const ContractionConstants& c,
                             double grid_step = 0.1);

// Largest-clearance scan start: the greatest period top X whose envelope tail
// mass stays below tail_budget inside the table, returned as x0 = alpha * X.
double auto_scan_x0(const TableView& table, const ContractionConstants& c,
                    double tail_budget = 1e-3);

struct BoundCheckEntry {
    long k = 0;
    double value = 0.0;
    double bound = 0.0;
    bool ok = false;
};
struct BoundCheckReport {
    long n = 0;
    std::vector<BoundCheckEntry> entries;
    bool all_ok = true;
    double worst_slack = 0.0; // min over entries of bound - value
};

// |E[X_k] - alpha^k n| <= beta/(1-alpha) for k <= k_max, via exact pushforward.
BoundCheckReport expectation_bound_check(const PushforwardOperator& op,
                                         const DriftParameters& drift, long n, long k_max);
// Var(X_k) <= C alpha^(kp) n^p + D for k <= k_max, via exact pushforward.
BoundCheckReport variance_bound_check(const PushforwardOperator& op,
                                      const ContractionConstants& c, long n, long k_max);

// Batch form sharing the backward moment vectors across every start n <= op.limit().
struct LemmaScanResult {
    bool all_ok = true;
    double worst_mean_slack = 0.0;
    double worst_var_slack = 0.0;
    long worst_mean_n = -1, worst_mean_k = -1;
    long worst_var_n = -1, worst_var_k = -1;
};
LemmaScanResult lemma_bounds_scan(const PushforwardOperator& op, const ContractionConstants& c,
                                  long n_lo, long n_hi, long k_max);

} // namespace selfavg
