// Acceptance suite: one line per criterion, exit 1 if any selected criterion
// fails. Heavy tables are cached under --out-dir between runs (native dumps,
// full precision). Criterion 9 is the hours-scale full reproduction and only
// runs when explicitly selected with --criteria 9.

#include "selfavg/envelope.hpp"
#include "selfavg/recursion.hpp"
#include "selfavg/simulator.hpp"
#include "selfavg/table_io.hpp"

#include "../oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

using namespace selfavg;

namespace {

struct Context {
    std::string out_dir = "acceptance_out";
    std::set<int> criteria = {1, 2, 3, 4, 5, 6, 7, 8, 10};
    int failures = 0;
    std::string table6000_path;
};

void report(Context& ctx, int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++ctx.failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SequenceTable cached_table(const Context& ctx, const std::string& kernel_name, long n_max,
                           long bits, long max_bits = 4096) {
    const std::string path = ctx.out_dir + "/table_" + kernel_name + "_" +
                             std::to_string(n_max) + "_p" + std::to_string(bits) +
                             ".native.json";
    if (std::filesystem::exists(path)) {
        auto t = load_table(path, true);
        if (t.kernel_name == kernel_name && t.n_max == n_max && t.precision_bits == bits)
            return t;
        std::fprintf(stderr, "cache mismatch, rebuilding: %s\n", path.c_str());
    }
    const auto kernel = make_kernel(kernel_name);
    PrecisionConfig cfg;
    cfg.initial_bits = bits;
    cfg.max_bits = max_bits;
    const auto t0 = std::chrono::steady_clock::now();
    auto t = build_table(*kernel, n_max, cfg);
    std::fprintf(stderr, "built %s n_max=%ld @%ld bits in %.1fs\n", kernel_name.c_str(), n_max,
                 bits, seconds_since(t0));
    save_table(t, path, TableFormat::native);
    return t;
}

ContractionConstants roulette_constants(double K = 138.0) {
    return contraction_constants(*RouletteKernel{}.default_drift(), K);
}

// ---- criterion 1: exact small cases --------------------------------------
void criterion_1(Context& ctx) {
    RouletteKernel kernel;
    const auto table = build_table(kernel, 6);
    bool pass = table.values[2].cmp(1.0) == 0;
    const double p3_err = std::abs(table.value(3) - 0.25);
    pass = pass && p3_err <= 1e-15;

    double worst = 0.0;
    for (long n = 2; n <= 6; ++n) {
        const auto row = kernel.pmf_row(n, PrecisionConfig{});
        const auto exact = oracles::roulette_pmf_exact(n);
        for (long j = 0; j < n; ++j)
            worst = std::max(worst, oracles::abs_error(row.w[static_cast<size_t>(j)],
                                                       exact[static_cast<size_t>(j)]));
        const auto krow = kernel.kill_subset_row(n, PrecisionConfig{});
        const auto kexact = oracles::kill_subset_exact(n);
        for (long k = 1; k <= n; ++k)
            worst = std::max(worst, oracles::abs_error(krow.q[static_cast<size_t>(k)],
                                                       kexact[static_cast<size_t>(k)]));
    }
    pass = pass && worst <= 1e-25;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "exact small cases: p(2)=1, |p(3)-1/4| = %.2e, pmf/killset vs enumeration "
                  "(n<=6) max err %.2e",
                  p3_err, worst);
    report(ctx, 1, pass, buf);
}

// ---- criterion 2: drift constants on [2, 2000] ----------------------------
void criterion_2(Context& ctx) {
    RouletteKernel kernel;
    const auto rep = verify_drift(kernel, *kernel.default_drift(), 2, 2000);
    long failures = 0;
    for (const auto& e : rep.entries)
        if (!e.mean_ok || !e.var_ok) ++failures;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "|mu_n - n/e| <= 2/e and sigma_n^2 <= gamma n + delta for 2 <= n <= 2000 "
                  "(%ld failures)",
                  failures);
    report(ctx, 2, rep.all_pass && failures == 0, buf);
}

// ---- criterion 3: recursion self-checks + doubled-precision agreement -----
void criterion_3(Context& ctx, const SequenceTable& t256) {
    const auto t512 = cached_table(ctx, "roulette", 2000, 512);
    double worst_resid = 0.0;
    for (long n = 2; n <= 2000; ++n)
        worst_resid = std::max(worst_resid, t256.residuals[static_cast<size_t>(n)]);
    const bool resid_ok = worst_resid < 1e-20;

    double worst_diff = 0.0;
    for (long n = 0; n <= 2000; ++n) {
        const BigFloat d =
            abs_diff(t256.values[static_cast<size_t>(n)], t512.values[static_cast<size_t>(n)], 640);
        worst_diff = std::max(worst_diff, d.to_double());
    }
    const double bound = std::ldexp(1.0, -128);
    const bool agree_ok = worst_diff <= bound;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "row residuals < 1e-20 (max %.2e) and 256 vs 512 bit rebuild agrees to >= "
                  "128 bits (max diff %.2e)",
                  worst_resid, worst_diff);
    report(ctx, 3, resid_ok && agree_ok, buf);
}

// ---- criterion 4: Monte Carlo cross-check for n in {3..30} ----------------
void criterion_4(Context& ctx, const SequenceTable& table) {
    bool pass = true;
    double worst_sigmas = 0.0;
    for (long n = 3; n <= 30; ++n) {
        TrialConfig cfg;
        cfg.kernel_name = "roulette";
        cfg.n_start = n;
        cfg.trials = 1000000;
        cfg.seed = 20240000 + static_cast<uint64_t>(n);
        const auto est = estimate_p(cfg);
        const double sigmas = std::abs(est.p_hat - table.value(n)) / est.std_error;
        worst_sigmas = std::max(worst_sigmas, sigmas);
        pass = pass && sigmas <= 4.0;
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "recursion vs mechanistic Monte Carlo (1e6 trials), n in {3..30}: worst "
                  "deviation %.2f sigma",
                  worst_sigmas);
    report(ctx, 4, pass, buf);
}

// ---- criterion 5: martingale identity -------------------------------------
void criterion_5(Context& ctx, const SequenceTable& table, const PushforwardOperator& op) {
    std::vector<BigFloat> f(static_cast<size_t>(op.limit()) + 1, BigFloat(op.bits()));
    for (long j = 0; j <= op.limit(); ++j)
        mpfr_set(f[static_cast<size_t>(j)].raw(), table.values[static_cast<size_t>(j)].raw(),
                 MPFR_RNDN);
    double worst = 0.0;
    for (long k = 0; k <= 10; ++k) {
        for (long n = 2; n <= op.limit(); ++n)
            worst = std::max(worst,
                             std::abs(f[static_cast<size_t>(n)].to_double() - table.value(n)));
        if (k < 10) f = op.apply_backward(f);
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "martingale identity |E[p(X_k)] - p(n)| < 1e-12 for n <= 300, k <= 10 "
                  "(max %.2e)",
                  worst);
    report(ctx, 5, worst < 1e-12, buf);
}

// ---- criterion 6: lemma bounds with K = 138 constants ----------------------
void criterion_6(Context& ctx, const PushforwardOperator& op) {
    const auto consts = roulette_constants();
    const auto scan = lemma_bounds_scan(op, consts, 2, 300, 10);
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "lemma bounds (K=138): worst mean slack %.3e, worst variance slack %.3e "
                  "(n <= 300, k <= 10)",
                  scan.worst_mean_slack, scan.worst_var_slack);
    report(ctx, 6, scan.all_ok, buf);
}

// ---- criterion 7: theorem containment -------------------------------------
void criterion_7(Context& ctx, const SequenceTable& table) {
    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    const auto consts = roulette_constants();
    bool pass = true;
    long points = 0;
    for (double x : {40.0, 60.0, 80.0}) {
        const auto rep = subsequence_containment(x, view, consts);
        pass = pass && rep.all_ok;
        points += static_cast<long>(rep.entries.size());
    }
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "l(x) <= p(N_i) <= u(x) for x in {40, 60, 80} on the 2000-table (%ld "
                  "subsequence points)",
                  points);
    report(ctx, 7, pass, buf);
}

// ---- criterion 8: desk-scale non-convergence certificate -------------------
void criterion_8(Context& ctx, const SequenceTable& table) {
    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    const auto consts = roulette_constants();
    const double x0 = auto_scan_x0(view, consts);
    const auto scan = scan_period(x0, view, consts, 0.1);
    const bool pass = scan.certified_nonconvergent && scan.gap > 0.02;
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "non-convergence certified on the 2000-table: limsup_lower - liminf_upper = "
                  "%.4f > 0.02 (x0 = %.1f, liminf in [%.4f, %.4f], limsup in [%.4f, %.4f])",
                  scan.gap, x0, scan.liminf_lower, scan.liminf_upper, scan.limsup_lower,
                  scan.limsup_upper);
    report(ctx, 8, pass, buf);
}

// ---- criterion 9: full reproduction (hours) --------------------------------
void criterion_9(Context& ctx) {
    SequenceTable table;
    if (!ctx.table6000_path.empty() && std::filesystem::exists(ctx.table6000_path)) {
        table = load_table(ctx.table6000_path, true);
        if (table.kernel_name != "roulette" || table.n_max < 6000) {
            report(ctx, 9, false, "supplied 6000-table file does not match (kernel/n_max)");
            return;
        }
    } else {
        table = cached_table(ctx, "roulette", 6000, 256, 6144);
    }
    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    const auto consts = roulette_constants();

    // The scan start trades envelope tail mass against relative window width;
    // every period start yields valid bounds, so intersect a few of them.
    PeriodScanResult best;
    best.liminf_lower = 0.0;
    best.liminf_upper = 1.0;
    best.limsup_lower = 0.0;
    best.limsup_upper = 1.0;
    double x0_used = 0.0;
    for (double tail_budget : {3e-3, 1e-3, 3e-4, 1e-4}) {
        const double x0 = auto_scan_x0(view, consts, tail_budget);
        const auto scan = scan_period(x0, view, consts, 2.0);
        std::printf("  scan x0 = %7.1f (tail <= %.0e): liminf in [%.6f, %.6f], limsup in "
                    "[%.6f, %.6f]\n",
                    x0, tail_budget, scan.liminf_lower, scan.liminf_upper, scan.limsup_lower,
                    scan.limsup_upper);
        std::fflush(stdout);
        if (scan.liminf_lower > best.liminf_lower) x0_used = x0;
        best.liminf_lower = std::max(best.liminf_lower, scan.liminf_lower);
        best.liminf_upper = std::min(best.liminf_upper, scan.liminf_upper);
        best.limsup_lower = std::max(best.limsup_lower, scan.limsup_lower);
        best.limsup_upper = std::min(best.limsup_upper, scan.limsup_upper);
    }

    const bool liminf_in = best.liminf_lower > 0.4702 && best.liminf_upper < 0.4714;
    const bool limsup_in = best.limsup_lower > 0.5227 && best.limsup_upper < 0.5237;
    const bool edges_close = std::abs(best.liminf_lower - 0.4702) <= 1e-3 &&
                             std::abs(best.liminf_upper - 0.4714) <= 1e-3 &&
                             std::abs(best.limsup_lower - 0.5227) <= 1e-3 &&
                             std::abs(best.limsup_upper - 0.5237) <= 1e-3;
    const bool improves = best.liminf_upper < 0.477487 && best.limsup_lower > 0.515383;
    char buf[360];
    std::snprintf(buf, sizeof(buf),
                  "full reproduction (n_max=6000, K=138, x0=%.1f): liminf in [%.6f, %.6f], "
                  "limsup in [%.6f, %.6f], improves prior bounds: %s",
                  x0_used, best.liminf_lower, best.liminf_upper, best.limsup_lower,
                  best.limsup_upper, improves ? "yes" : "no");
    report(ctx, 9, liminf_in && limsup_in && edges_close && improves, buf);
}

// ---- criterion 10: parity oracle -------------------------------------------
void criterion_10(Context& ctx) {
    const auto table = cached_table(ctx, "parity", 10000, 256);
    double worst = 0.0;
    for (long n = 0; n <= 10000; ++n)
        worst = std::max(worst, std::abs(table.value(n) - static_cast<double>(n % 2)));
    const bool values_ok = worst < 1e-12;

    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    ParityKernel kernel;
    const auto consts = contraction_constants(*kernel.default_drift(), 138.0);
    const double x0 = auto_scan_x0(view, consts);
    const auto scan = scan_period(x0, view, consts, 0.1);
    const bool inconclusive =
        !scan.certified_nonconvergent && scan.liminf_lower < 0.01 && scan.limsup_upper > 0.99;
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "parity oracle: p(n) = n mod 2 for n <= 1e4 (max err %.2e); envelope scan "
                  "inconclusive as expected (l = %.3f, u = %.3f)",
                  worst, scan.liminf_lower, scan.limsup_upper);
    report(ctx, 10, values_ok && inconclusive, buf);
}

} // namespace

int main(int argc, char** argv) {
    Context ctx;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out-dir" && i + 1 < argc) {
            ctx.out_dir = argv[++i];
        } else if (arg == "--table6000" && i + 1 < argc) {
            ctx.table6000_path = argv[++i];
        } else if (arg == "--criteria" && i + 1 < argc) {
            ctx.criteria.clear();
            const std::string list = argv[++i];
            size_t pos = 0;
            while (pos < list.size()) {
                size_t next = list.find(',', pos);
                if (next == std::string::npos) next = list.size();
                ctx.criteria.insert(std::atoi(list.substr(pos, next - pos).c_str()));
                pos = next + 1;
            }
        } else if (arg == "--help") {
            std::printf("usage: selfavg_acceptance [--out-dir DIR] [--criteria 1,2,...]"
                        " [--table6000 PATH]\n"
                        "default criteria: 1-8 and 10; criterion 9 (hours) must be selected "
                        "explicitly\n");
            return 0;
        } else {
            std::fprintf(stderr, "unknown argument: %s\n", arg.c_str());
            return 2;
        }
    }
    std::filesystem::create_directories(ctx.out_dir);
    if (ctx.table6000_path.empty())
        ctx.table6000_path = ctx.out_dir + "/table_roulette_6000_p256.native.json";

    const auto t0 = std::chrono::steady_clock::now();
    const bool need_2000 = ctx.criteria.count(3) || ctx.criteria.count(4) ||
                           ctx.criteria.count(5) || ctx.criteria.count(7) ||
                           ctx.criteria.count(8);
    SequenceTable t2000;
    if (need_2000) t2000 = cached_table(ctx, "roulette", 2000, 256);

    const bool need_op300 = ctx.criteria.count(5) || ctx.criteria.count(6);
    std::optional<PushforwardOperator> op300;
    if (need_op300) op300.emplace(RouletteKernel{}, 300);

    if (ctx.criteria.count(1)) criterion_1(ctx);
    if (ctx.criteria.count(2)) criterion_2(ctx);
    if (ctx.criteria.count(3)) criterion_3(ctx, t2000);
    if (ctx.criteria.count(4)) criterion_4(ctx, t2000);
    if (ctx.criteria.count(5)) criterion_5(ctx, t2000, *op300);
    if (ctx.criteria.count(6)) criterion_6(ctx, *op300);
    if (ctx.criteria.count(7)) criterion_7(ctx, t2000);
    if (ctx.criteria.count(8)) criterion_8(ctx, t2000);
    if (ctx.criteria.count(9)) criterion_9(ctx);
    if (ctx.criteria.count(10)) criterion_10(ctx);

    std::printf("acceptance: %d criteria run, %d failed (%.1fs)\n",
                static_cast<int>(ctx.criteria.size()), ctx.failures, seconds_since(t0));
    return ctx.failures == 0 ? 0 : 1;
}
