#include "selfavg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>

namespace selfavg {

namespace {

uint64_t mix64(uint64_t z) {
    z += UINT64_C(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

// Row-acceptance gates. Residual doubles underflow to 0 for very negative
// log-magnitudes, which is the passing direction.
bool gates_pass(const RowCheck& c, long store_bits, const PrecisionConfig& cfg,
                bool have_moments, bool have_spot) {
    const double g = std::ldexp(1.0, -static_cast<int>(store_bits / 2));
    if (!(std::abs(c.norm_resid) < std::min(g, cfg.normalization_tol))) return false;
    if (have_moments && !(c.m1_resid < g && c.m2_resid < g)) return false;
    if (!(c.min_entry > -g)) return false;
    if (have_spot && !(c.spot_resid < g / 16.0)) return false;
    return true;
}

long working_bits_for(const TransitionKernel& k, long n, const PrecisionConfig& cfg) {
    const double w = static_cast<double>(cfg.initial_bits) / 2.0 + k.precision_overhead_bits(n);
    return std::max(cfg.initial_bits, static_cast<long>(std::ceil(w)));
}

// Moment residuals of a weight row against the kernel's closed forms,
// relative to max(1, moment).
void moment_residuals(const TransitionKernel& kernel, long n, mpfr_prec_t W,
                      const std::vector<BigFloat>& w, RowCheck& chk) {
    BigFloat mean(W), second(W);
    if (!kernel.closed_form_moments(n, W, mean, second)) return;
    BigFloat m1(W), m2(W), t(W);
    for (size_t j = 1; j < w.size(); ++j) {
        mpfr_mul_ui(t.raw(), w[j].raw(), static_cast<unsigned long>(j), MPFR_RNDN);
        m1 += t;
        mpfr_mul_ui(t.raw(), t.raw(), static_cast<unsigned long>(j), MPFR_RNDN);
        m2 += t;
    }
    m1 -= mean;
    m1.abs_inplace();
    if (mean.cmp(1.0) > 0) m1 /= mean;
    m2 -= second;
    m2.abs_inplace();
    if (second.cmp(1.0) > 0) m2 /= second;
    chk.m1_resid = m1.to_double();
    chk.m2_resid = m2.to_double();
}

void norm_and_min(const std::vector<BigFloat>& w, mpfr_prec_t W, RowCheck& chk) {
    BigFloat s(W);
    double min_entry = 0.0;
    for (const auto& x : w) {
        s += x;
        if (x.sign() < 0) min_entry = std::min(min_entry, x.to_double());
    }
    s -= 1.0;
    chk.norm_resid = std::abs(s.to_double());
    chk.min_entry = min_entry;
}

void clamp_unit_interval(std::vector<BigFloat>& w) {
    for (auto& x : w) {
        if (x.sign() < 0)
            mpfr_set_zero(x.raw(), 1);
        else if (x.cmp(1.0) > 0)
            x = 1.0;
    }
}

struct QRowWork {
    std::vector<BigFloat> q;   // q_{n,k}, index 0..n
    std::vector<BigFloat> w;   // pmf over survivor counts, index 0..n
    RowCheck check;
};

// One attempt at working precision W. The recursion
//   q_{n,k} = ((k-1)/(n-1))^k (k/(n-1))^(n-k) - sum_{i<k} C(k,i) q_{n,i}
// is cancellation-prone; accuracy is certified by an independent second
// route (binomial inversion of the same power terms, different rounding
// path) evaluated at sampled k and weighted by C(n,k).
QRowWork roulette_row_attempt(long n, mpfr_prec_t W) {
    const size_t sz = static_cast<size_t>(n) + 1;
    QRowWork out;
    out.q.assign(sz, BigFloat(W));
    out.w.assign(sz, BigFloat(W));
    std::vector<BigFloat> pascal(sz, BigFloat(W)); // C(k, .) at stage k
    std::vector<BigFloat> a(sz, BigFloat(W));      // power terms
    pascal[0] = 1L;
    if (n >= 1) pascal[1] = 1L;

    std::set<long> spot_ks;
    if (n >= 2) {
        spot_ks.insert(n);
        spot_ks.insert(std::max<long>(2, n - 1));
        for (double f : {0.632, 0.45, 0.85})
            spot_ks.insert(std::max<long>(2, static_cast<long>(f * static_cast<double>(n))));
        for (uint64_t j = 0; j < 2; ++j)
            spot_ks.insert(2 + static_cast<long>(mix64(static_cast<uint64_t>(n) * 0x9E3779B1u + j) %
                                                 static_cast<uint64_t>(n - 1)));
    }
    std::vector<std::pair<long, BigFloat>> spot_diffs;

    BigFloat base(W), t(W), s(W), direct(W);
    for (long k = 2; k <= n; ++k) {
        // extend pascal row from C(k-1,.) to C(k,.)
        pascal[static_cast<size_t>(k)] = 1L;
        for (long i = k - 1; i >= 1; --i)
            mpfr_add(pascal[static_cast<size_t>(i)].raw(), pascal[static_cast<size_t>(i)].raw(),
                     pascal[static_cast<size_t>(i - 1)].raw(), MPFR_RNDN);

        // a_k = ((k-1)/(n-1))^k * (k/(n-1))^(n-k)
        auto& ak = a[static_cast<size_t>(k)];
        mpfr_set_si(base.raw(), k - 1, MPFR_RNDN);
        mpfr_div_si(base.raw(), base.raw(), n - 1, MPFR_RNDN);
        mpfr_pow_ui(ak.raw(), base.raw(), static_cast<unsigned long>(k), MPFR_RNDN);
        mpfr_set_si(base.raw(), k, MPFR_RNDN);
        mpfr_div_si(base.raw(), base.raw(), n - 1, MPFR_RNDN);
        mpfr_pow_ui(t.raw(), base.raw(), static_cast<unsigned long>(n - k), MPFR_RNDN);
        mpfr_mul(ak.raw(), ak.raw(), t.raw(), MPFR_RNDN);

        mpfr_set_zero(s.raw(), 1);
        for (long i = 2; i < k; ++i) {
            mpfr_mul(t.raw(), pascal[static_cast<size_t>(i)].raw(),
                     out.q[static_cast<size_t>(i)].raw(), MPFR_RNDN);
            mpfr_add(s.raw(), s.raw(), t.raw(), MPFR_RNDN);
        }
        mpfr_sub(out.q[static_cast<size_t>(k)].raw(), ak.raw(), s.raw(), MPFR_RNDN);

        if (spot_ks.count(k)) {
            mpfr_set_zero(direct.raw(), 1);
            for (long i = 2; i <= k; ++i) {
                mpfr_mul(t.raw(), pascal[static_cast<size_t>(i)].raw(),
                         a[static_cast<size_t>(i)].raw(), MPFR_RNDN);
                if ((k - i) & 1)
                    mpfr_sub(direct.raw(), direct.raw(), t.raw(), MPFR_RNDN);
                else
                    mpfr_add(direct.raw(), direct.raw(), t.raw(), MPFR_RNDN);
            }
            mpfr_sub(direct.raw(), direct.raw(), out.q[static_cast<size_t>(k)].raw(), MPFR_RNDN);
            mpfr_abs(direct.raw(), direct.raw(), MPFR_RNDN);
            spot_diffs.emplace_back(k, direct);
        }
    }

    // pascal now holds C(n, .); assemble pmf weights w_j = C(n,j) q_{n,n-j}
    for (long j = 0; j <= n - 2; ++j)
        mpfr_mul(out.w[static_cast<size_t>(j)].raw(), pascal[static_cast<size_t>(j)].raw(),
                 out.q[static_cast<size_t>(n - j)].raw(), MPFR_RNDN);

    out.check.working_bits = static_cast<long>(W);
    double spot = 0.0;
    for (auto& [k, d] : spot_diffs) {
        mpfr_mul(t.raw(), d.raw(), pascal[static_cast<size_t>(k)].raw(), MPFR_RNDN);
        spot = std::max(spot, t.to_double());
    }
    out.check.spot_resid = spot;
    return out;
}

} // namespace

double RowCheck::max_resid() const {
    return std::max({std::abs(norm_resid), m1_resid, m2_resid, spot_resid,
                     min_entry < 0 ? -min_entry : 0.0});
}

double RouletteKernel::mu(long n) {
    if (n < 2) throw std::domain_error("roulette_mu: n must be >= 2");
    const double m = static_cast<double>(n - 1);
    return static_cast<double>(n) * std::pow(1.0 - 1.0 / m, m);
}

double RouletteKernel::sigma2(long n) {
    if (n < 2) throw std::domain_error("roulette_sigma2: n must be >= 2");
    const double m = static_cast<double>(n - 1);
    const double mu_n = mu(n);
    const double pair = (static_cast<double>(n) * m) * std::pow(1.0 - 1.0 / m, 2.0) *
                        std::pow(1.0 - 2.0 / m, static_cast<double>(n - 2));
    return mu_n - mu_n * mu_n + pair;
}

void RouletteKernel::mu_big(long n, BigFloat& out) {
    if (n < 2) throw std::domain_error("roulette_mu: n must be >= 2");
    const mpfr_prec_t W = out.prec();
    BigFloat base(W);
    mpfr_set_si(base.raw(), n - 2, MPFR_RNDN);
    mpfr_div_si(base.raw(), base.raw(), n - 1, MPFR_RNDN);
    mpfr_pow_ui(out.raw(), base.raw(), static_cast<unsigned long>(n - 1), MPFR_RNDN);
    mpfr_mul_si(out.raw(), out.raw(), n, MPFR_RNDN);
}

// E[Y(n)^2] = mu_n + (n^2 - n)(1 - 1/(n-1))^2 (1 - 2/(n-1))^(n-2)
void RouletteKernel::second_moment_big(long n, BigFloat& out) {
    if (n < 2) throw std::domain_error("roulette second moment: n must be >= 2");
    const mpfr_prec_t W = out.prec();
    BigFloat base(W), pair(W);
    mpfr_set_si(base.raw(), n - 3, MPFR_RNDN);
    mpfr_div_si(base.raw(), base.raw(), n - 1, MPFR_RNDN);
    mpfr_pow_ui(pair.raw(), base.raw(), static_cast<unsigned long>(n - 2), MPFR_RNDN);
    mpfr_set_si(base.raw(), n - 2, MPFR_RNDN);
    mpfr_div_si(base.raw(), base.raw(), n - 1, MPFR_RNDN);
    mpfr_sqr(base.raw(), base.raw(), MPFR_RNDN);
    mpfr_mul(pair.raw(), pair.raw(), base.raw(), MPFR_RNDN);
    mpfr_mul_si(pair.raw(), pair.raw(), n, MPFR_RNDN);
    mpfr_mul_si(pair.raw(), pair.raw(), n - 1, MPFR_RNDN);
    mu_big(n, out);
    mpfr_add(out.raw(), out.raw(), pair.raw(), MPFR_RNDN);
}

bool RouletteKernel::closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                                         BigFloat& second_moment) const {
    mean.set_prec(bits);
    second_moment.set_prec(bits);
    mu_big(n, mean);
    second_moment_big(n, second_moment);
    return true;
}

std::optional<DriftParameters> RouletteKernel::default_drift() const {
    const double e = std::exp(1.0);
    return DriftParameters{1.0 / e, 2.0 / e, (e - 2.0) / (e * e), (3.0 - e) / (2.0 * e * e), 1.0};
}

namespace {
long initial_working_bits(const TransitionKernel& k, long n, const PrecisionConfig& cfg) {
    if (cfg.initial_bits < 64)
        throw std::invalid_argument("PrecisionConfig: initial_bits must be >= 64");
    if (cfg.max_bits < cfg.initial_bits)
        throw std::invalid_argument("PrecisionConfig: max_bits must be >= initial_bits");
    if (cfg.escalation_factor < 2)
        throw std::invalid_argument("PrecisionConfig: escalation_factor must be >= 2");
    return std::min(working_bits_for(k, n, cfg), cfg.max_bits);
}
} // namespace

KillSubsetRow RouletteKernel::kill_subset_row(long n, const PrecisionConfig& cfg) const {
    if (n < 2) throw std::domain_error("kill_subset_row: n must be >= 2");
    long W = initial_working_bits(*this, n, cfg);
    while (true) {
        QRowWork work = roulette_row_attempt(n, W);
        norm_and_min(work.w, W, work.check);
        moment_residuals(*this, n, W, work.w, work.check);
        if (gates_pass(work.check, cfg.initial_bits, cfg, true, true)) {
            clamp_unit_interval(work.q);
            KillSubsetRow row;
            row.n = n;
            row.q = std::move(work.q);
            row.check = work.check;
            return row;
        }
        if (W >= cfg.max_bits)
            throw PrecisionError(n, W,
                                 "kill_subset_row: residual gates failed at max_bits for n = " +
                                     std::to_string(n));
        W = std::min(W * cfg.escalation_factor, cfg.max_bits);
    }
}

PmfRow RouletteKernel::pmf_row(long n, const PrecisionConfig& cfg) const {
    if (n < 2) throw std::domain_error("roulette pmf: n must be >= 2");
    long W = initial_working_bits(*this, n, cfg);
    while (true) {
        QRowWork work = roulette_row_attempt(n, W);
        norm_and_min(work.w, W, work.check);
        moment_residuals(*this, n, W, work.w, work.check);
        if (gates_pass(work.check, cfg.initial_bits, cfg, true, true)) {
            clamp_unit_interval(work.w);
            PmfRow row;
            row.n = n;
            row.w = std::move(work.w);
            row.check = work.check;
            return row;
        }
        if (W >= cfg.max_bits)
            throw PrecisionError(n, W, "roulette pmf: residual gates failed at max_bits for n = " +
                                           std::to_string(n));
        W = std::min(W * cfg.escalation_factor, cfg.max_bits);
    }
}

PmfRow ParityKernel::pmf_row(long n, const PrecisionConfig& cfg) const {
    if (n < 2) throw std::domain_error("parity pmf: n must be >= 2");
    const long W = initial_working_bits(*this, n, cfg);
    const long m = (n % 2 == 0) ? n / 2 : (n - 1) / 2;
    const long off = (n % 2 == 0) ? 0 : 1;
    PmfRow row;
    row.n = n;
    row.w.assign(static_cast<size_t>(n) + 1, BigFloat(W));
    // b_j = C(m, j) 2^-m, built multiplicatively
    BigFloat b(W);
    b = 1L;
    mpfr_div_2ui(b.raw(), b.raw(), static_cast<unsigned long>(m), MPFR_RNDN);
    for (long j = 0; j <= m; ++j) {
        row.w[static_cast<size_t>(2 * j + off)] = b;
        if (j < m) {
            mpfr_mul_si(b.raw(), b.raw(), m - j, MPFR_RNDN);
            mpfr_div_si(b.raw(), b.raw(), j + 1, MPFR_RNDN);
        }
    }
    row.support_violation = row.w[static_cast<size_t>(n)].sign() > 0;
    row.check.working_bits = W;
    norm_and_min(row.w, W, row.check);
    moment_residuals(*this, n, W, row.w, row.check);
    if (!gates_pass(row.check, cfg.initial_bits, cfg, true, false))
        throw PrecisionError(n, W, "parity pmf: residual gates failed for n = " + std::to_string(n));
    return row;
}

bool ParityKernel::closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                                       BigFloat& second_moment) const {
    mean.set_prec(bits);
    second_moment.set_prec(bits);
    const long m = (n % 2 == 0) ? n / 2 : (n - 1) / 2;
    if (n % 2 == 0) {
        mean = m;
        second_moment = m * m + m; // 4 E[B^2], B ~ Bin(m, 1/2)
    } else {
        mean = m + 1;
        second_moment = m * m + 3 * m + 1;
    }
    return true;
}

PmfRow CoinflipKernel::pmf_row(long n, const PrecisionConfig& cfg) const {
    if (n < 2) throw std::domain_error("coinflip pmf: n must be >= 2");
    const long W = initial_working_bits(*this, n, cfg);
    PmfRow row;
    row.n = n;
    row.w.assign(static_cast<size_t>(n) + 1, BigFloat(W));
    BigFloat z(W), b(W);
    z = 1L;
    mpfr_div_2ui(z.raw(), z.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    mpfr_ui_sub(z.raw(), 1, z.raw(), MPFR_RNDN); // 1 - 2^-n
    b = 1L;
    mpfr_div_2ui(b.raw(), b.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    for (long j = 0; j <= n - 1; ++j) {
        mpfr_div(row.w[static_cast<size_t>(j)].raw(), b.raw(), z.raw(), MPFR_RNDN);
        mpfr_mul_si(b.raw(), b.raw(), n - j, MPFR_RNDN);
        mpfr_div_si(b.raw(), b.raw(), j + 1, MPFR_RNDN);
    }
    row.check.working_bits = W;
    norm_and_min(row.w, W, row.check);
    moment_residuals(*this, n, W, row.w, row.check);
    if (!gates_pass(row.check, cfg.initial_bits, cfg, true, false))
        throw PrecisionError(n, W,
                             "coinflip pmf: residual gates failed for n = " + std::to_string(n));
    return row;
}

bool CoinflipKernel::closed_form_moments(long n, mpfr_prec_t bits, BigFloat& mean,
                                         BigFloat& second_moment) const {
    mean.set_prec(bits);
    second_moment.set_prec(bits);
    // E[Y] = (n/2 - n 2^-n) / (1 - 2^-n), E[Y^2] = (n(n+1)/4 - n^2 2^-n) / (1 - 2^-n)
    BigFloat z(bits), t(bits);
    z = 1L;
    mpfr_div_2ui(z.raw(), z.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    mpfr_ui_sub(z.raw(), 1, z.raw(), MPFR_RNDN);
    mean = n;
    mpfr_div_2ui(mean.raw(), mean.raw(), 1, MPFR_RNDN);
    t = n;
    mpfr_div_2ui(t.raw(), t.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    mean -= t;
    mean /= z;
    second_moment = n * (n + 1);
    mpfr_div_2ui(second_moment.raw(), second_moment.raw(), 2, MPFR_RNDN);
    t = n * n;
    mpfr_div_2ui(t.raw(), t.raw(), static_cast<unsigned long>(n), MPFR_RNDN);
    second_moment -= t;
    second_moment /= z;
    return true;
}

PmfRow CustomKernel::pmf_row(long n, const PrecisionConfig& cfg) const {
    if (n <= n0_) throw std::domain_error("custom pmf: n must exceed n0");
    const long W = initial_working_bits(*this, n, cfg);
    PmfRow row;
    row.n = n;
    row.w.assign(static_cast<size_t>(n) + 1, BigFloat(W));
    row_(n, W, row.w);
    if (row.w.size() != static_cast<size_t>(n) + 1)
        throw std::invalid_argument("custom pmf: row function must fill n+1 weights");
    row.support_violation = row.w[static_cast<size_t>(n)].sign() > 0;
    row.check.working_bits = W;
    norm_and_min(row.w, W, row.check);
    if (!gates_pass(row.check, cfg.initial_bits, cfg, false, false))
        throw PrecisionError(n, W,
                             "custom pmf: normalization gate failed for n = " + std::to_string(n));
    return row;
}

namespace {
std::mutex registry_mutex;
std::map<std::string, std::function<std::unique_ptr<TransitionKernel>()>>& registry() {
    static std::map<std::string, std::function<std::unique_ptr<TransitionKernel>()>> r;
    return r;
}
} // namespace

std::unique_ptr<TransitionKernel> make_kernel(const std::string& name) {
    if (name == "roulette") return std::make_unique<RouletteKernel>();
    if (name == "coinflip") return std::make_unique<CoinflipKernel>();
    if (name == "parity") return std::make_unique<ParityKernel>();
    std::lock_guard<std::mutex> lk(registry_mutex);
    auto it = registry().find(name);
    if (it == registry().end())
        throw std::invalid_argument("unknown kernel: " + name);
    return it->second();
}

void register_kernel(const std::string& name,
                     std::function<std::unique_ptr<TransitionKernel>()> factory) {
    std::lock_guard<std::mutex> lk(registry_mutex);
    registry()[name] = std::move(factory);
}

DriftReport verify_drift(const TransitionKernel& kernel, const DriftParameters& params,
                         long n_lo, long n_hi, const PrecisionConfig& cfg) {
    params.validate();
    DriftReport report;
    report.params = params;
    const mpfr_prec_t W = static_cast<mpfr_prec_t>(std::max<long>(cfg.initial_bits, 128));
    BigFloat mean(W), second(W), var(W), lhs(W), rhs(W), t(W);
    for (long n = std::max<long>(n_lo, kernel.n0() + 1); n <= n_hi; ++n) {
        bool have = kernel.closed_form_moments(n, W, mean, second);
        if (!have) {
            PmfRow row = kernel.pmf_row(n, cfg);
            mean.set_prec(W);
            second.set_prec(W);
            for (size_t j = 1; j < row.w.size(); ++j) {
                mpfr_mul_ui(t.raw(), row.w[j].raw(), static_cast<unsigned long>(j), MPFR_RNDN);
                mean += t;
                mpfr_mul_ui(t.raw(), t.raw(), static_cast<unsigned long>(j), MPFR_RNDN);
                second += t;
            }
        }
        // var = E[Y^2] - E[Y]^2
        mpfr_sqr(var.raw(), mean.raw(), MPFR_RNDN);
        mpfr_sub(var.raw(), second.raw(), var.raw(), MPFR_RNDN);

        DriftReportEntry e;
        e.n = n;
        e.mean = mean.to_double();
        e.variance = var.to_double();
        // |E - alpha n| <= beta
        mpfr_set_d(lhs.raw(), params.alpha, MPFR_RNDN);
        mpfr_mul_si(lhs.raw(), lhs.raw(), n, MPFR_RNDN);
        mpfr_sub(lhs.raw(), mean.raw(), lhs.raw(), MPFR_RNDN);
        mpfr_abs(lhs.raw(), lhs.raw(), MPFR_RNDN);
        e.mean_ok = mpfr_cmp_d(lhs.raw(), params.beta) <= 0;
        // Var <= gamma n^p + delta
        mpfr_set_si(rhs.raw(), n, MPFR_RNDN);
        if (params.p_exponent == 1.0)
            ; // n^1
        else {
            mpfr_set_d(t.raw(), params.p_exponent, MPFR_RNDN);
            mpfr_pow(rhs.raw(), rhs.raw(), t.raw(), MPFR_RNDN);
        }
        mpfr_mul_d(rhs.raw(), rhs.raw(), params.gamma, MPFR_RNDN);
        mpfr_add_d(rhs.raw(), rhs.raw(), params.delta, MPFR_RNDN);
        e.var_ok = mpfr_cmp(var.raw(), rhs.raw()) <= 0;
        if (!e.mean_ok || !e.var_ok) report.all_pass = false;
        report.entries.push_back(e);
    }
    return report;
}

} // namespace selfavg
