#include "selfavg/envelope.hpp"

#include "selfavg/simd.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>

namespace selfavg {

double ContractionConstants::tau(double x) const {
    return std::sqrt(C * (x + drift.alpha / 2.0) + D);
}

double ContractionConstants::t(double x) const {
    return tau(x) + drift.beta / (1.0 - drift.alpha) + 0.5;
}

double contraction_K_threshold(const DriftParameters& d) {
    return d.beta * d.beta / (d.alpha * d.alpha - d.alpha * d.alpha * d.alpha);
}

ContractionConstants contraction_constants(const DriftParameters& drift, double K) {
    drift.validate();
    if (drift.p_exponent != 1.0)
        throw std::invalid_argument("contraction_constants: requires p_exponent = 1");
    const double a = drift.alpha, b = drift.beta, g = drift.gamma, d = drift.delta;
    const double thr = contraction_K_threshold(drift);
    if (!(K > thr))
        throw std::invalid_argument("contraction_constants: K = " + std::to_string(K) +
                                    " infeasible; requires K > " + std::to_string(thr));
    const double a2K = a * a * K;
    ContractionConstants c;
    c.K = K;
    c.drift = drift;
    c.C = (g * a2K - g * b * b) / (a * a * a * K - a * a * a * a * K - a * b * b);
    c.D = (g * b + (d + a2K) * (1.0 - a)) * (a2K - b * b) /
          ((1.0 - a) * (a2K - b * b - a * a * a * a * K));
    if (!(c.C >= 0.0) || !(c.D > 0.0))
        throw std::runtime_error("contraction_constants: produced nonpositive constants");
    return c;
}

double generalized_K_threshold(const DriftParameters& d) {
    return d.beta * d.beta / (d.alpha * d.alpha - std::pow(d.alpha, 4.0 - d.p_exponent));
}

ContractionConstants generalized_constants_search(const DriftParameters& drift, double K,
                                                  int max_iterations) {
    drift.validate();
    const double p = drift.p_exponent;
    if (!(p > 1.0 && p < 2.0))
        throw std::invalid_argument("generalized_constants_search: requires p_exponent in (1,2)");
    const double a = drift.alpha, b = drift.beta, g = drift.gamma, d = drift.delta;
    const double thr = generalized_K_threshold(drift);
    if (!(K > thr))
        throw std::invalid_argument("generalized_constants_search: K = " + std::to_string(K) +
                                    " infeasible; requires K > " + std::to_string(thr));
    const double a2K = a * a * K;
    const double c1 = std::pow(a, 4.0 - p) * K / (a2K - b * b);
    const double c2 = std::pow(a, 4.0) * K / (a2K - b * b);

    double C = 0.0;
    if (g > 0.0) {
        auto gC = [&](double x) {
            return 2.0 * g * std::pow(a, -p) * std::pow(1.0 + std::sqrt(x), p) + c1 * x - x;
        };
        double hi = 1.0;
        int it = 0;
        while (gC(hi) > 0.0) {
            hi *= 2.0;
            if (++it > max_iterations)
                throw std::runtime_error("generalized_constants_search: C search failed "
                                         "within the iteration budget");
        }
        double lo = 0.0;
        for (int i = 0; i < 200 && (hi - lo) > 1e-13 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (gC(mid) <= 0.0 ? hi : lo) = mid;
        }
        C = hi;
    }

    const double bb = b / (1.0 - a);
    const double A0 = d + a2K;
    double D;
    if (g == 0.0) {
        D = A0 / (1.0 - c2);
    } else {
        auto hD = [&](double x) {
            return 2.0 * g * std::pow(std::sqrt(C + x) + bb, p) + A0 + c2 * x - x;
        };
        double hi = 1.0;
        int it = 0;
        while (hD(hi) > 0.0) {
            hi *= 2.0;
            if (++it > max_iterations)
                throw std::runtime_error("generalized_constants_search: D search failed "
                                         "within the iteration budget");
        }
        double lo = 0.0;
        for (int i = 0; i < 200 && (hi - lo) > 1e-13 * hi; ++i) {
            const double mid = 0.5 * (lo + hi);
            (hD(mid) <= 0.0 ? hi : lo) = mid;
        }
        D = hi;
    }

    ContractionConstants c;
    c.K = K;
    c.C = C;
    c.D = D;
    c.drift = drift;
    return c;
}

long round_index(double x, TieRule rule) {
    if (rule == TieRule::away_from_zero) return std::llround(x);
    return static_cast<long>(std::nearbyint(x));
}

namespace {

constexpr double kEdgeEps = 1e-9;

// Integer window bounds with one-sided resolution at exact crossings.
long ceil_sided(double v, bool include_at_integer) {
    const double r = std::nearbyint(v);
    if (std::abs(v - r) < kEdgeEps) return static_cast<long>(r) + (include_at_integer ? 0 : 1);
    return static_cast<long>(std::ceil(v));
}
long floor_sided(double v, bool include_at_integer) {
    const double r = std::nearbyint(v);
    if (std::abs(v - r) < kEdgeEps) return static_cast<long>(r) - (include_at_integer ? 0 : 1);
    return static_cast<long>(std::floor(v));
}

double tail_g(double tau, double k) {
    const double d = tau + k;
    return (tau * tau) / (d * d);
}

} // namespace

EnvelopeResult envelope_at(double x, const TableView& table, const ContractionConstants& c,
                           int side, bool keep_weights) {
    if (!(x > 0.0)) throw std::invalid_argument("envelope_at: x must be positive");
    const double tau = c.tau(x);
    const double tt = c.t(x);

    // largest M with x + t + M + 1 <= n_max (boundary crossing is an event)
    const long M = floor_sided(static_cast<double>(table.n_max) - x - tt - 1.0, side <= 0);
    if (M < 1)
        throw EnvelopeRangeError(std::ceil(x + tt + 2.0),
                                 "envelope_at: table too short at x = " + std::to_string(x) +
                                     "; requires n_max >= " + std::to_string(std::ceil(x + tt + 2.0)));

    const long lo0 = std::max<long>(0, ceil_sided(x - (tt + 1.0), side <= 0));
    const long hi0 = std::min<long>(table.n_max, floor_sided(x + (tt + 1.0), side >= 0));
    if (lo0 > hi0) throw std::runtime_error("envelope_at: empty base window");

    std::vector<double> q(static_cast<size_t>(M));
    simd::window_weights(tau, static_cast<size_t>(M), q.data());

    std::vector<double> mins(static_cast<size_t>(M)), maxs(static_cast<size_t>(M));
    long lo = lo0, hi = hi0;
    double mn = table.at(lo), mx = table.at(lo);
    for (long j = lo + 1; j <= hi; ++j) {
        mn = std::min(mn, table.at(j));
        mx = std::max(mx, table.at(j));
    }
    for (long k = 0; k < M; ++k) {
        mins[static_cast<size_t>(k)] = mn;
        maxs[static_cast<size_t>(k)] = mx;
        const long nlo = std::max<long>(0, lo0 - (k + 1));
        const long nhi = std::min<long>(table.n_max, hi0 + (k + 1));
        for (long j = nlo; j < lo; ++j) {
            mn = std::min(mn, table.at(j));
            mx = std::max(mx, table.at(j));
        }
        for (long j = hi + 1; j <= nhi; ++j) {
            mn = std::min(mn, table.at(j));
            mx = std::max(mx, table.at(j));
        }
        lo = nlo;
        hi = nhi;
    }

    const double tail = tail_g(tau, static_cast<double>(M));
    EnvelopeResult r;
    r.x = x;
    r.tau = tau;
    r.t = tt;
    r.M = M;
    r.tail_mass = tail;
    r.lower = simd::dot(q.data(), mins.data(), static_cast<size_t>(M));
    r.upper = simd::dot(q.data(), maxs.data(), static_cast<size_t>(M)) + tail;
    assert(r.lower <= r.upper + 1e-12);
    r.lower = std::clamp(r.lower, 0.0, 1.0);
    r.upper = std::clamp(r.upper, 0.0, 1.0);
    if (keep_weights) r.weights = std::move(q);
    return r;
}

ContainmentReport subsequence_containment(double x, const TableView& table,
                                          const ContractionConstants& c, TieRule rule) {
    EnvelopeResult env = envelope_at(x, table, c, 0, false);
    ContainmentReport rep;
    rep.x = x;
    rep.lower = env.lower;
    rep.upper = env.upper;
    const double inv_alpha = 1.0 / c.drift.alpha;
    double scaled = x;
    for (long i = 0; i < 256; ++i, scaled *= inv_alpha) {
        const long N = round_index(scaled, rule);
        if (N > table.n_max) break;
        ContainmentEntry e;
        e.i = i;
        e.N_i = N;
        e.p = table.at(N);
        e.ok = (env.lower - 1e-12 <= e.p) && (e.p <= env.upper + 1e-12);
        rep.all_ok = rep.all_ok && e.ok;
        rep.entries.push_back(e);
    }
    return rep;
}

namespace {

// x-locations in [x0, x1] where x + sgn*t(x) crosses an integer. Both
// families are strictly increasing in x (t'(x) = C/(2 tau) < 1 is asserted),
// so each integer level is hit once and bisection applies.
void crossing_events(double x0, double x1, const ContractionConstants& c, int sgn,
                     std::vector<double>& out) {
    auto f = [&](double x) { return x + sgn * c.t(x); };
    const double slope_guard = c.C / (2.0 * std::sqrt(c.D));
    if (!(slope_guard < 1.0))
        throw std::runtime_error("scan_period: t(x) slope >= 1; event enumeration invalid");
    const double flo = f(x0), fhi = f(x1);
    for (double v = std::ceil(flo); v <= std::floor(fhi); v += 1.0) {
        double lo = x0, hi = x1;
        if (f(lo) > v || f(hi) < v) continue;
        for (int it = 0; it < 80 && (hi - lo) > 1e-12 * std::max(1.0, hi); ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < v ? lo : hi) = mid;
        }
        const double e = 0.5 * (lo + hi);
        if (e > x0 + 1e-9 && e < x1 - 1e-9) out.push_back(e);
    }
}

} // namespace

PeriodScanResult scan_period(double x0, const TableView& table, const ContractionConstants& c,
                             double grid_step) {
    if (!(x0 > 0.0)) throw std::invalid_argument("scan_period: x0 must be positive");
    if (!(grid_step > 0.0)) throw std::invalid_argument("scan_period: grid_step must be positive");
    const double x1 = x0 / c.drift.alpha;
    envelope_at(x1, table, c, 0, false); // throws EnvelopeRangeError if the period does not fit

    std::vector<double> events;
    crossing_events(x0, x1, c, -1, events);
    crossing_events(x0, x1, c, +1, events);
    std::sort(events.begin(), events.end());

    PeriodScanResult r;
    r.x0 = x0;
    r.grid_step = grid_step;
    r.liminf_lower = 2.0;
    r.liminf_upper = 2.0;
    r.limsup_lower = -1.0;
    r.limsup_upper = -1.0;

    auto absorb = [&](double x, int side) {
        const EnvelopeResult e = envelope_at(x, table, c, side, false);
        if (e.lower < r.liminf_lower) r.liminf_lower = e.lower;
        if (e.upper < r.liminf_upper) {
            r.liminf_upper = e.upper;
            r.argmin_u = x;
        }
        if (e.lower > r.limsup_lower) {
            r.limsup_lower = e.lower;
            r.argmax_l = x;
        }
        if (e.upper > r.limsup_upper) r.limsup_upper = e.upper;
        ++r.evaluations;
    };

    absorb(x0, 0);
    absorb(x0, +1);
    absorb(x1, -1);
    absorb(x1, 0);
    for (double e : events) {
        absorb(e, -1);
        absorb(e, 0);
        absorb(e, +1);
    }
    for (double x = x0 + grid_step; x < x1; x += grid_step) absorb(x, 0);

    r.gap = r.limsup_lower - r.liminf_upper;
    r.certified_nonconvergent = r.gap > 0.0;
    return r;
}

double auto_scan_x0(const TableView& table, const ContractionConstants& c, double tail_budget) {
    // largest X with at least one window: x + t(x) + 2 <= n_max
    auto fits = [&](double X) { return X + c.t(X) + 2.0 <= static_cast<double>(table.n_max); };
    if (!fits(2.0))
        throw EnvelopeRangeError(c.t(2.0) + 4.0, "auto_scan_x0: table too short for any scan");
    double lo = 2.0, hi = static_cast<double>(table.n_max);
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (fits(mid) ? lo : hi) = mid;
    }
    const double x_fit_max = lo;

    auto tail_of = [&](double X) {
        const double tau = c.tau(X);
        const double M = std::floor(static_cast<double>(table.n_max) - X - c.t(X) - 1.0);
        return tail_g(tau, M);
    };
    if (tail_of(2.0) > tail_budget) return c.drift.alpha * x_fit_max;
    lo = 2.0;
    hi = x_fit_max;
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (tail_of(mid) <= tail_budget ? lo : hi) = mid;
    }
    return c.drift.alpha * lo;
}

BoundCheckReport expectation_bound_check(const PushforwardOperator& op,
                                         const DriftParameters& drift, long n, long k_max) {
    if (n > op.limit()) throw std::invalid_argument("expectation_bound_check: n exceeds limit");
    BoundCheckReport rep;
    rep.n = n;
    rep.worst_slack = 1e300;
    const double bound = drift.beta / (1.0 - drift.alpha);
    std::vector<BigFloat> f(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    for (long j = 0; j <= op.limit(); ++j) f[static_cast<size_t>(j)] = j;
    double scale = static_cast<double>(n); // alpha^k n
    for (long k = 0; k <= k_max; ++k) {
        BoundCheckEntry e;
        e.k = k;
        e.value = std::abs(f[static_cast<size_t>(n)].to_double() - scale);
        e.bound = bound;
        e.ok = e.value <= e.bound;
        rep.all_ok = rep.all_ok && e.ok;
        rep.worst_slack = std::min(rep.worst_slack, e.bound - e.value);
        rep.entries.push_back(e);
        if (k < k_max) {
            f = op.apply_backward(f);
            scale *= drift.alpha;
        }
    }
    return rep;
}

BoundCheckReport variance_bound_check(const PushforwardOperator& op,
                                      const ContractionConstants& c, long n, long k_max) {
    if (n > op.limit()) throw std::invalid_argument("variance_bound_check: n exceeds limit");
    BoundCheckReport rep;
    rep.n = n;
    rep.worst_slack = 1e300;
    const double p = c.drift.p_exponent;
    std::vector<BigFloat> m(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    std::vector<BigFloat> s(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    for (long j = 0; j <= op.limit(); ++j) {
        m[static_cast<size_t>(j)] = j;
        s[static_cast<size_t>(j)] = j * j;
    }
    BigFloat var(op.bits());
    for (long k = 0; k <= k_max; ++k) {
        mpfr_sqr(var.raw(), m[static_cast<size_t>(n)].raw(), MPFR_RNDN);
        mpfr_sub(var.raw(), s[static_cast<size_t>(n)].raw(), var.raw(), MPFR_RNDN);
        BoundCheckEntry e;
        e.k = k;
        e.value = var.to_double();
        e.bound = c.C * std::pow(c.drift.alpha, p * static_cast<double>(k)) *
                      std::pow(static_cast<double>(n), p) +
                  c.D;
        e.ok = e.value <= e.bound;
        rep.all_ok = rep.all_ok && e.ok;
        rep.worst_slack = std::min(rep.worst_slack, e.bound - e.value);
        rep.entries.push_back(e);
        if (k < k_max) {
            m = op.apply_backward(m);
            s = op.apply_backward(s);
        }
    }
    return rep;
}

LemmaScanResult lemma_bounds_scan(const PushforwardOperator& op, const ContractionConstants& c,
                                  long n_lo, long n_hi, long k_max) {
    if (n_hi > op.limit()) throw std::invalid_argument("lemma_bounds_scan: n_hi exceeds limit");
    LemmaScanResult r;
    r.worst_mean_slack = 1e300;
    r.worst_var_slack = 1e300;
    const double a = c.drift.alpha;
    const double p = c.drift.p_exponent;
    const double mean_bound = c.drift.beta / (1.0 - a);
    std::vector<BigFloat> m(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    std::vector<BigFloat> s(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    for (long j = 0; j <= op.limit(); ++j) {
        m[static_cast<size_t>(j)] = j;
        s[static_cast<size_t>(j)] = j * j;
    }
    BigFloat var(op.bits());
    for (long k = 0; k <= k_max; ++k) {
        const double ak = std::pow(a, static_cast<double>(k));
        const double akp = std::pow(a, p * static_cast<double>(k));
        for (long n = n_lo; n <= n_hi; ++n) {
            const double dev =
                std::abs(m[static_cast<size_t>(n)].to_double() - ak * static_cast<double>(n));
            const double mean_slack = mean_bound - dev;
            if (mean_slack < r.worst_mean_slack) {
                r.worst_mean_slack = mean_slack;
                r.worst_mean_n = n;
                r.worst_mean_k = k;
            }
            mpfr_sqr(var.raw(), m[static_cast<size_t>(n)].raw(), MPFR_RNDN);
            mpfr_sub(var.raw(), s[static_cast<size_t>(n)].raw(), var.raw(), MPFR_RNDN);
            const double vbound = c.C * akp * std::pow(static_cast<double>(n), p) + c.D;
            const double var_slack = vbound - var.to_double();
            if (var_slack < r.worst_var_slack) {
                r.worst_var_slack = var_slack;
                r.worst_var_n = n;
                r.worst_var_k = k;
            }
        }
        if (k < k_max) {
            m = op.apply_backward(m);
            s = op.apply_backward(s);
        }
    }
    r.all_ok = r.worst_mean_slack >= 0.0 && r.worst_var_slack >= 0.0;
    return r;
}

} // namespace selfavg
