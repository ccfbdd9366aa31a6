#include "selfavg/recursion.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>

namespace selfavg {

std::vector<double> SequenceTable::values_double() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v.to_double());
    return out;
}

double SequenceTable::residual_max() const {
    double m = 0.0;
    for (double r : residuals) m = std::max(m, r);
    return m;
}

SequenceTable build_table(const TransitionKernel& kernel, long n_max, const PrecisionConfig& cfg,
                          const BuildOptions& opts) {
    const long n0 = kernel.n0();
    if (n_max < n0) throw std::invalid_argument("build_table: n_max must be >= kernel n0");

    const mpfr_prec_t P = static_cast<mpfr_prec_t>(cfg.initial_bits);
    SequenceTable table;
    table.kernel_name = kernel.name();
    table.n_max = n_max;
    table.precision_bits = cfg.initial_bits;
    table.values.assign(static_cast<size_t>(n_max) + 1, BigFloat(P));
    table.residuals.assign(static_cast<size_t>(n_max) + 1, 0.0);
    table.row_bits.assign(static_cast<size_t>(n_max) + 1, 0);

    for (long n = 0; n <= std::min(n0, n_max); ++n)
        table.values[static_cast<size_t>(n)] = kernel.boundary_value(n);

    long start = n0 + 1;
    if (opts.resume_from != nullptr) {
        const SequenceTable& r = *opts.resume_from;
        if (r.kernel_name != table.kernel_name || r.precision_bits != table.precision_bits)
            throw std::invalid_argument("build_table: resume table does not match kernel/precision");
        const long upto = std::min(r.n_max, n_max);
        for (long n = 0; n <= upto; ++n) {
            table.values[static_cast<size_t>(n)] = r.values[static_cast<size_t>(n)];
            table.residuals[static_cast<size_t>(n)] = r.residuals[static_cast<size_t>(n)];
            table.row_bits[static_cast<size_t>(n)] = r.row_bits[static_cast<size_t>(n)];
        }
        table.support_violation = r.support_violation;
        start = upto + 1;
    }

    const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
    const long block = std::max<long>(4, 2L * threads);
    const double gate = std::ldexp(1.0, -static_cast<int>(cfg.initial_bits / 2));

    long since_checkpoint = 0;
    for (long blk = start; blk <= n_max; blk += block) {
        const long blk_end = std::min(n_max, blk + block - 1);
        const long count = blk_end - blk + 1;
        std::vector<PmfRow> rows(static_cast<size_t>(count));
        std::vector<std::exception_ptr> errs(static_cast<size_t>(count));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
        for (long i = 0; i < count; ++i) {
            try {
                rows[static_cast<size_t>(i)] = kernel.pmf_row(blk + i, cfg);
            } catch (...) {
                errs[static_cast<size_t>(i)] = std::current_exception();
            }
        }
        for (auto& e : errs)
            if (e) std::rethrow_exception(e);

        for (long n = blk; n <= blk_end; ++n) {
            PmfRow& row = rows[static_cast<size_t>(n - blk)];
            const mpfr_prec_t W = static_cast<mpfr_prec_t>(row.check.working_bits);
            BigFloat acc(W), t(W);
            for (long j = 0; j < n; ++j) {
                const auto& wj = row.w[static_cast<size_t>(j)];
                if (wj.is_zero()) continue;
                mpfr_mul(t.raw(), wj.raw(), table.values[static_cast<size_t>(j)].raw(), MPFR_RNDN);
                mpfr_add(acc.raw(), acc.raw(), t.raw(), MPFR_RNDN);
            }
            // Mass at Y(n) = n (parity example) makes p(n) = E[p(Y(n))] a
            // fixed-point equation; solve it directly.
            const auto& self_mass = row.w[static_cast<size_t>(n)];
            if (self_mass.sign() > 0) {
                mpfr_ui_sub(t.raw(), 1, self_mass.raw(), MPFR_RNDN);
                mpfr_div(acc.raw(), acc.raw(), t.raw(), MPFR_RNDN);
            }
            const double v = acc.to_double();
            if (v < -gate || v > 1.0 + gate)
                throw PrecisionError(n, row.check.working_bits,
                                     "build_table: p(n) escaped [0,1] at n = " + std::to_string(n));
            if (acc.sign() < 0)
                mpfr_set_zero(acc.raw(), 1);
            else if (acc.cmp(1.0) > 0)
                acc = 1.0;
            table.values[static_cast<size_t>(n)] = std::move(acc);
            mpfr_prec_round(table.values[static_cast<size_t>(n)].raw(), P, MPFR_RNDN);
            table.residuals[static_cast<size_t>(n)] = row.check.max_resid();
            table.row_bits[static_cast<size_t>(n)] = row.check.working_bits;
            table.support_violation |= row.support_violation;
            row.w.clear();
            row.w.shrink_to_fit();
        }

        if (opts.on_progress) opts.on_progress(blk_end, n_max);
        since_checkpoint += count;
        if (opts.checkpoint_every > 0 && opts.on_checkpoint &&
            since_checkpoint >= opts.checkpoint_every && blk_end < n_max) {
            opts.on_checkpoint(table, blk_end);
            since_checkpoint = 0;
        }
    }
    return table;
}

ResidualReport table_residual_report(const SequenceTable& table) {
    ResidualReport rep;
    for (size_t n = 0; n < table.residuals.size(); ++n) {
        if (table.residuals[n] > rep.max_resid) {
            rep.max_resid = table.residuals[n];
            rep.argmax_n = static_cast<long>(n);
        }
        rep.max_row_bits = std::max(rep.max_row_bits, table.row_bits[n]);
    }
    return rep;
}

PushforwardOperator::PushforwardOperator(const TransitionKernel& kernel, long n_limit,
                                         const PrecisionConfig& cfg, mpfr_prec_t vector_bits,
                                         int threads)
    : n0_(kernel.n0()), limit_(n_limit), bits_(vector_bits) {
    const long n0 = n0_;
    if (n_limit <= n0) throw std::invalid_argument("PushforwardOperator: n_limit must exceed n0");
    rows_.resize(static_cast<size_t>(n_limit) + 1);
    const int nt = threads > 0 ? threads : omp_get_max_threads();
    std::vector<std::exception_ptr> errs(static_cast<size_t>(n_limit) + 1);
#pragma omp parallel for schedule(dynamic, 4) num_threads(nt)
    for (long m = n0 + 1; m <= n_limit; ++m) {
        try {
            PmfRow row = kernel.pmf_row(m, cfg);
            auto& dst = rows_[static_cast<size_t>(m)];
            dst.assign(row.w.size(), BigFloat(bits_));
            for (size_t j = 0; j < row.w.size(); ++j)
                mpfr_set(dst[j].raw(), row.w[j].raw(), MPFR_RNDN);
        } catch (...) {
            errs[static_cast<size_t>(m)] = std::current_exception();
        }
    }
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

std::vector<BigFloat> PushforwardOperator::law(long n, long k_rounds) const {
    if (n > limit_) throw std::invalid_argument("pushforward: n exceeds the configured limit");
    const long n0 = n0_;
    std::vector<BigFloat> v(static_cast<size_t>(n) + 1, BigFloat(bits_));
    v[static_cast<size_t>(n)] = 1.0;
    std::vector<BigFloat> next(static_cast<size_t>(n) + 1, BigFloat(bits_));
    BigFloat t(bits_);
    for (long k = 0; k < k_rounds; ++k) {
        for (auto& x : next) mpfr_set_zero(x.raw(), 1);
        for (long m = 0; m <= n; ++m) {
            const auto& vm = v[static_cast<size_t>(m)];
            if (vm.is_zero()) continue;
            if (m <= n0) {
                next[static_cast<size_t>(m)] += vm;
                continue;
            }
            const auto& row = rows_[static_cast<size_t>(m)];
            for (long j = 0; j < static_cast<long>(row.size()); ++j) {
                if (row[static_cast<size_t>(j)].is_zero()) continue;
                mpfr_mul(t.raw(), row[static_cast<size_t>(j)].raw(), vm.raw(), MPFR_RNDN);
                mpfr_add(next[static_cast<size_t>(j)].raw(), next[static_cast<size_t>(j)].raw(),
                         t.raw(), MPFR_RNDN);
            }
        }
        std::swap(v, next);
    }
    return v;
}

std::vector<BigFloat> PushforwardOperator::apply_backward(const std::vector<BigFloat>& f) const {
    const long n0 = n0_;
    const long top = static_cast<long>(f.size()) - 1;
    if (top > limit_) throw std::invalid_argument("apply_backward: vector exceeds limit");
    std::vector<BigFloat> g(f.size(), BigFloat(bits_));
    BigFloat t(bits_);
    for (long m = 0; m <= top; ++m) {
        if (m <= n0) {
            g[static_cast<size_t>(m)] = f[static_cast<size_t>(m)];
            continue;
        }
        const auto& row = rows_[static_cast<size_t>(m)];
        auto& gm = g[static_cast<size_t>(m)];
        for (size_t j = 0; j < row.size(); ++j) {
            if (row[j].is_zero()) continue;
            mpfr_mul(t.raw(), row[j].raw(), f[j].raw(), MPFR_RNDN);
            mpfr_add(gm.raw(), gm.raw(), t.raw(), MPFR_RNDN);
        }
    }
    return g;
}

std::vector<BigFloat> pushforward_distribution(const TransitionKernel& kernel, long n,
                                               long k_rounds, const PrecisionConfig& cfg,
                                               long limit) {
    if (n > limit)
        throw std::invalid_argument(
            "pushforward: n = " + std::to_string(n) + " exceeds the limit " + std::to_string(limit) +
            "; use the Monte Carlo simulator for large states");
    PushforwardOperator op(kernel, n, cfg);
    return op.law(n, k_rounds);
}

MartingaleReport martingale_check(const SequenceTable& table, const PushforwardOperator& op,
                                  long n, long k_max) {
    if (n > table.n_max || n > op.limit() || op.limit() > table.n_max)
        throw std::invalid_argument("martingale_check: n or operator limit out of table range");
    MartingaleReport rep;
    rep.n = n;
    const double pn = table.value(n);
    std::vector<BigFloat> f(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    for (long j = 0; j <= op.limit(); ++j)
        mpfr_set(f[static_cast<size_t>(j)].raw(), table.values[static_cast<size_t>(j)].raw(),
                 MPFR_RNDN);
    for (long k = 0; k <= k_max; ++k) {
        MartingaleEntry e;
        e.k = k;
        e.expectation = f[static_cast<size_t>(n)].to_double();
        e.deviation = std::abs(e.expectation - pn);
        rep.max_deviation = std::max(rep.max_deviation, e.deviation);
        rep.entries.push_back(e);
        if (k < k_max) f = op.apply_backward(f);
    }
    return rep;
}

} // namespace selfavg
