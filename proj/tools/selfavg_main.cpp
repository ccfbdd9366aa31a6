// selfavg: self-averaging sequence toolkit.
//   table     build p(0..n_max) by the exact high-precision recursion
//   envelope  Chebyshev bounds l(x), u(x) for the subsequence p([alpha^-i x])
//   scan      liminf/limsup bands over one period and the non-convergence verdict
//   simulate  mechanistic Monte Carlo estimate of p(n)
//   verify    drift / martingale / lemma / containment check suites
//
// Exit codes: 0 success, 2 usage, 3 numeric or precision failure,
// 4 verification failure.

#include "selfavg/envelope.hpp"
#include "selfavg/recursion.hpp"
#include "selfavg/simulator.hpp"
#include "selfavg/table_io.hpp"

#include "manifest.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

namespace {

using namespace selfavg;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerification = 4;

std::string resolve_out(const std::string& path) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    const char* dir = std::getenv("SELFAVG_OUT_DIR");
    if (dir == nullptr || *dir == '\0') return path;
    return (std::filesystem::path(dir) / path).string();
}

DriftParameters drift_for(const std::string& kernel_name) {
    const auto kernel = make_kernel(kernel_name);
    const auto drift = kernel->default_drift();
    if (!drift)
        throw std::invalid_argument("no default drift parameters for kernel: " + kernel_name);
    return *drift;
}

struct TableArgs {
    std::string kernel = "roulette";
    long n_max = 100;
    long precision_bits = 256;
    long max_bits = 4096;
    long checkpoint_every = 0;
    bool resume = false;
    int threads = 0;
    std::string out;
    std::string format = "native";
};

int run_table(const TableArgs& a) {
    const std::string out = resolve_out(a.out);
    const std::string ckpt = out + ".ckpt";
    const auto kernel = make_kernel(a.kernel);
    PrecisionConfig cfg;
    cfg.initial_bits = a.precision_bits;
    cfg.max_bits = a.max_bits;

    cli::ManifestWriter manifest("table");
    manifest.param("kernel", a.kernel);
    manifest.param("n_max", a.n_max);
    manifest.param("precision_bits", a.precision_bits);
    manifest.param("max_bits", a.max_bits);
    manifest.param("format", a.format);

    // long builds checkpoint by default so they can resume
    long every = a.checkpoint_every;
    if (every == 0 && a.n_max >= 3000) every = 100;

    SequenceTable resume_table;
    BuildOptions opts;
    opts.threads = a.threads;
    opts.checkpoint_every = every;
    if (every > 0 && !out.empty()) {
        opts.on_checkpoint = [&](const SequenceTable& t, long n_done) {
            SequenceTable partial = t;
            partial.n_max = n_done;
            partial.values.resize(static_cast<size_t>(n_done) + 1);
            partial.residuals.resize(static_cast<size_t>(n_done) + 1);
            partial.row_bits.resize(static_cast<size_t>(n_done) + 1);
            save_table(partial, ckpt, TableFormat::native);
        };
    }
    if (a.resume && std::filesystem::exists(ckpt)) {
        resume_table = load_table(ckpt, true);
        if (resume_table.kernel_name != a.kernel)
            throw std::invalid_argument("checkpoint kernel mismatch: " + resume_table.kernel_name);
        opts.resume_from = &resume_table;
        std::fprintf(stderr, "resuming from checkpoint at n = %ld\n", resume_table.n_max);
    }

    const auto table = build_table(*kernel, a.n_max, cfg, opts);
    std::printf("built %s table: n_max=%ld precision=%ld bits, max residual %.3e\n",
                table.kernel_name.c_str(), table.n_max, table.precision_bits,
                table.residual_max());
    if (!out.empty()) {
        save_table(table, out, format_from_name(a.format));
        if (std::filesystem::exists(ckpt)) std::filesystem::remove(ckpt);
        manifest.output(out);
        manifest.write();
        std::printf("wrote %s\n", out.c_str());
    }
    return kExitOk;
}

struct EnvelopeArgs {
    std::string table;
    double K = 138.0;
    std::vector<double> xs;
    std::string x_range; // "start:end[:step]"
    std::string out;
    std::string format = "csv";
};

int run_envelope(const EnvelopeArgs& a) {
    const auto table = load_table(a.table);
    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    const auto consts = contraction_constants(drift_for(table.kernel_name), a.K);

    std::vector<EnvelopeResult> rows;
    for (double x : a.xs) rows.push_back(envelope_at(x, view, consts, 0, true));
    if (!a.x_range.empty()) {
        double lo = 0, hi = 0, step = 0.1;
        const int got = std::sscanf(a.x_range.c_str(), "%lf:%lf:%lf", &lo, &hi, &step);
        if (got < 2 || !(hi > lo) || !(step > 0))
            throw std::invalid_argument("bad --x-range, expected start:end[:step]");
        for (double x = lo; x <= hi; x += step)
            rows.push_back(envelope_at(x, view, consts, 0, false));
    }
    if (rows.empty()) throw std::invalid_argument("envelope: provide --x and/or --x-range");

    for (const auto& r : rows)
        std::printf("x=%.6f t=%.6f M=%ld l=%.12f u=%.12f\n", r.x, r.t, r.M, r.lower, r.upper);

    if (!a.out.empty()) {
        const std::string out = resolve_out(a.out);
        cli::ManifestWriter manifest("envelope");
        manifest.param("table", a.table);
        manifest.param("K", a.K);
        manifest.param("x", a.xs);
        manifest.param("x_range", a.x_range);
        manifest.param("format", a.format);
        manifest.input(a.table);
        if (a.format == "json")
            save_envelope_json(rows, out);
        else
            save_envelope_csv(rows, out);
        manifest.output(out);
        manifest.write();
    }
    return kExitOk;
}

struct ScanArgs {
    std::string table;
    double K = 138.0;
    std::string x0 = "auto";
    double grid_step = 0.1;
    std::vector<double> k_sweep;
    std::string out;
    std::string format = "json";
};

int run_scan(const ScanArgs& a) {
    const auto table = load_table(a.table);
    const auto values = table.values_double();
    const TableView view{values.data(), table.n_max};
    const auto drift = drift_for(table.kernel_name);

    std::vector<double> ks = a.k_sweep;
    if (ks.empty()) ks.push_back(a.K);

    std::optional<PeriodScanResult> best;
    for (double K : ks) {
        const auto consts = contraction_constants(drift, K);
        const double x0 =
            (a.x0 == "auto") ? auto_scan_x0(view, consts) : std::stod(a.x0);
        auto scan = scan_period(x0, view, consts, a.grid_step);
        std::printf("K=%.6g x0=%.3f  liminf in [%.6f, %.6f]  limsup in [%.6f, %.6f]\n", K, x0,
                    scan.liminf_lower, scan.liminf_upper, scan.limsup_lower, scan.limsup_upper);
        if (!best) {
            best = scan;
        } else {
            best->liminf_lower = std::max(best->liminf_lower, scan.liminf_lower);
            best->liminf_upper = std::min(best->liminf_upper, scan.liminf_upper);
            best->limsup_lower = std::max(best->limsup_lower, scan.limsup_lower);
            best->limsup_upper = std::min(best->limsup_upper, scan.limsup_upper);
            best->gap = best->limsup_lower - best->liminf_upper;
            best->certified_nonconvergent = best->gap > 0.0;
        }
    }

    const auto& r = *best;
    std::printf("liminf_lower=%.10f\nliminf_upper=%.10f\nlimsup_lower=%.10f\nlimsup_upper=%.10f\n",
                r.liminf_lower, r.liminf_upper, r.limsup_lower, r.limsup_upper);
    if (r.certified_nonconvergent)
        std::printf("verdict: non-convergent (certified, gap %.6f)\n", r.gap);
    else
        std::printf("verdict: inconclusive by this method\n");

    if (!a.out.empty()) {
        const std::string out = resolve_out(a.out);
        cli::ManifestWriter manifest("scan");
        manifest.param("table", a.table);
        manifest.param("K", a.K);
        manifest.param("k_sweep", a.k_sweep);
        manifest.param("x0", a.x0);
        manifest.param("grid_step", a.grid_step);
        manifest.param("format", a.format);
        manifest.input(a.table);
        if (a.format == "csv")
            save_scan_csv(r, out);
        else
            save_scan_json(r, out);
        manifest.output(out);
        manifest.write();
    }
    return kExitOk;
}

struct SimulateArgs {
    std::string kernel = "roulette";
    long n = 0;
    long trials = 100000;
    uint64_t seed = 0;
    long batch_size = 1024;
    int threads = 0;
    std::string out;
    std::string histogram;
};

int run_simulate(const SimulateArgs& a) {
    TrialConfig cfg;
    cfg.kernel_name = a.kernel;
    cfg.n_start = a.n;
    cfg.trials = a.trials;
    cfg.seed = a.seed;
    cfg.batch_size = a.batch_size;
    cfg.threads = a.threads;
    const auto est = estimate_p(cfg);
    std::printf("kernel=%s n=%ld trials=%ld seed=%llu\np_hat=%.10f stderr=%.3e\n",
                est.kernel_name.c_str(), est.n_start, est.trials,
                static_cast<unsigned long long>(est.seed), est.p_hat, est.std_error);
    cli::ManifestWriter manifest("simulate");
    manifest.param("kernel", a.kernel);
    manifest.param("n", a.n);
    manifest.param("trials", a.trials);
    manifest.param("seed", a.seed);
    manifest.param("batch_size", a.batch_size);
    if (!a.out.empty()) {
        const std::string out = resolve_out(a.out);
        save_estimate_json(est, out);
        manifest.output(out);
    }
    if (!a.histogram.empty()) {
        const std::string hist = resolve_out(a.histogram);
        save_histograms_csv(est, hist);
        manifest.output(hist);
    }
    manifest.write();
    return kExitOk;
}

struct VerifyArgs {
    std::string suite = "all";
    std::string kernel = "roulette";
    std::string table;
    long n_max = 2000;
    long n = 300;
    long k_max = 10;
    double K = 138.0;
    std::vector<double> xs = {40.0, 60.0, 80.0};
    std::string ties = "away";
    std::string json_out;
};

int run_verify(const VerifyArgs& a) {
    bool all_ok = true;
    nlohmann::json report = nlohmann::json::object();

    std::optional<SequenceTable> table;
    std::optional<std::vector<double>> values;
    auto view = [&]() -> TableView {
        if (!table) {
            if (a.table.empty())
                throw std::invalid_argument("suite requires --table");
            table = load_table(a.table);
            values = table->values_double();
        }
        return TableView{values->data(), table->n_max};
    };
    auto kernel_name = [&]() {
        if (!a.table.empty()) {
            view();
            return table->kernel_name;
        }
        return a.kernel;
    };

    const bool want_drift = a.suite == "drift" || a.suite == "all";
    const bool want_martingale = a.suite == "martingale" || a.suite == "all";
    const bool want_lemmas = a.suite == "lemmas" || a.suite == "all";
    const bool want_containment = a.suite == "containment" || a.suite == "all";
    if (!want_drift && !want_martingale && !want_lemmas && !want_containment)
        throw std::invalid_argument("unknown suite: " + a.suite);

    if (want_drift) {
        const auto kernel = make_kernel(kernel_name());
        const auto rep = verify_drift(*kernel, drift_for(kernel_name()), 2, a.n_max);
        long failures = 0;
        for (const auto& e : rep.entries)
            if (!e.mean_ok || !e.var_ok) ++failures;
        std::printf("[%s] drift: %zu checks on [2, %ld], %ld failures\n",
                    rep.all_pass ? "ok" : "FAIL", rep.entries.size(), a.n_max, failures);
        report["drift"] = {{"pass", rep.all_pass}, {"failures", failures}};
        all_ok = all_ok && rep.all_pass;
    }

    if (want_martingale) {
        const auto v = view();
        const auto kernel = make_kernel(table->kernel_name);
        const long limit = std::min<long>(a.n, table->n_max);
        PushforwardOperator op(*kernel, limit);
        std::vector<BigFloat> f(static_cast<size_t>(limit) + 1, BigFloat(op.bits()));
        for (long j = 0; j <= limit; ++j)
            mpfr_set(f[static_cast<size_t>(j)].raw(),
                     table->values[static_cast<size_t>(j)].raw(), MPFR_RNDN);
        double worst = 0.0;
        for (long k = 0; k <= a.k_max; ++k) {
            for (long n = kernel->n0() + 1; n <= limit; ++n)
                worst = std::max(worst, std::abs(f[static_cast<size_t>(n)].to_double() -
                                                 table->value(n)));
            if (k < a.k_max) f = op.apply_backward(f);
        }
        const bool pass = worst < 1e-12;
        std::printf("[%s] martingale: n <= %ld, k <= %ld, max |E[p(X_k)] - p(n)| = %.3e\n",
                    pass ? "ok" : "FAIL", limit, a.k_max, worst);
        report["martingale"] = {{"pass", pass}, {"max_deviation", worst}};
        all_ok = all_ok && pass;
        (void)v;
    }

    if (want_lemmas) {
        const auto kernel = make_kernel(kernel_name());
        const auto drift = drift_for(kernel_name());
        const auto consts = contraction_constants(drift, a.K);
        PushforwardOperator op(*kernel, a.n);
        const auto scan = lemma_bounds_scan(op, consts, kernel->n0() + 1, a.n, a.k_max);
        std::printf("[%s] lemmas: n <= %ld, k <= %ld, K = %g; worst mean slack %.3e, "
                    "worst variance slack %.3e\n",
                    scan.all_ok ? "ok" : "FAIL", a.n, a.k_max, a.K, scan.worst_mean_slack,
                    scan.worst_var_slack);
        report["lemmas"] = {{"pass", scan.all_ok},
                            {"worst_mean_slack", scan.worst_mean_slack},
                            {"worst_var_slack", scan.worst_var_slack}};
        all_ok = all_ok && scan.all_ok;
    }

    if (want_containment) {
        const auto v = view();
        const auto consts = contraction_constants(drift_for(table->kernel_name), a.K);
        bool pass = true;
        nlohmann::json entries = nlohmann::json::array();
        const TieRule rule = a.ties == "even" ? TieRule::to_even : TieRule::away_from_zero;
        for (double x : a.xs) {
            const auto rep = subsequence_containment(x, v, consts, rule);
            std::printf("[%s] containment: x = %g, %zu subsequence points in [l, u] = "
                        "[%.6f, %.6f]\n",
                        rep.all_ok ? "ok" : "FAIL", x, rep.entries.size(), rep.lower, rep.upper);
            entries.push_back({{"x", x}, {"pass", rep.all_ok}});
            pass = pass && rep.all_ok;
        }
        report["containment"] = {{"pass", pass}, {"points", entries}};
        all_ok = all_ok && pass;
    }

    if (!a.json_out.empty()) {
        report["pass"] = all_ok;
        std::ofstream f(resolve_out(a.json_out), std::ios::trunc);
        f << report.dump(1, '\t') << "\n";
    }
    std::printf("verify: %s\n", all_ok ? "PASS" : "FAIL");
    return all_ok ? kExitOk : kExitVerification;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-averaging sequences: exact tables, envelope bounds, simulation"};
    app.set_version_flag("--version", "selfavg 0.1.0");
    app.require_subcommand(1);

    TableArgs ta;
    auto* table_cmd = app.add_subcommand("table", "build p(0..n_max) at high precision");
    table_cmd->add_option("--kernel", ta.kernel, "kernel name (roulette, coinflip, parity)");
    table_cmd->add_option("--n-max", ta.n_max, "largest index to compute")->required();
    table_cmd->add_option("--precision-bits", ta.precision_bits, "storage precision (bits)");
    table_cmd->add_option("--max-bits", ta.max_bits, "working precision cap (bits)");
    table_cmd->add_option("--checkpoint-every", ta.checkpoint_every,
                          "rows between checkpoints (0 = auto for n_max >= 3000)");
    table_cmd->add_flag("--resume", ta.resume, "resume from <out>.ckpt if present");
    table_cmd->add_option("--threads", ta.threads, "worker threads (0 = all)");
    table_cmd->add_option("--out", ta.out, "output file");
    table_cmd->add_option("--format", ta.format, "output format: native, json, csv");

    EnvelopeArgs ea;
    auto* env_cmd = app.add_subcommand("envelope", "Chebyshev bounds l(x), u(x)");
    env_cmd->add_option("--table", ea.table, "table file (json or native)")->required();
    env_cmd->add_option("--K", ea.K, "free constant of the variance lemma");
    env_cmd->add_option("--x", ea.xs, "evaluation points");
    env_cmd->add_option("--x-range", ea.x_range, "curve emission: start:end[:step]");
    env_cmd->add_option("--out", ea.out, "output file");
    env_cmd->add_option("--format", ea.format, "csv or json");

    ScanArgs sa;
    auto* scan_cmd = app.add_subcommand("scan", "liminf/limsup bands over one period");
    scan_cmd->add_option("--table", sa.table, "table file")->required();
    scan_cmd->add_option("--K", sa.K, "free constant of the variance lemma");
    scan_cmd->add_option("--x0", sa.x0, "period start, or 'auto'");
    scan_cmd->add_option("--grid-step", sa.grid_step, "curve grid step");
    scan_cmd->add_option("--k-sweep", sa.k_sweep, "sweep K values and keep the sharpest bands");
    scan_cmd->add_option("--out", sa.out, "output file");
    scan_cmd->add_option("--format", sa.format, "json or csv");

    SimulateArgs ma;
    auto* sim_cmd = app.add_subcommand("simulate", "Monte Carlo estimate of p(n)");
    sim_cmd->add_option("--kernel", ma.kernel, "kernel name");
    sim_cmd->add_option("--n", ma.n, "starting population")->required();
    sim_cmd->add_option("--trials", ma.trials, "number of trials");
    sim_cmd->add_option("--seed", ma.seed, "RNG seed");
    sim_cmd->add_option("--batch-size", ma.batch_size, "trials per RNG stream");
    sim_cmd->add_option("--threads", ma.threads, "worker threads (0 = all)");
    sim_cmd->add_option("--out", ma.out, "JSON estimate output");
    sim_cmd->add_option("--histogram", ma.histogram, "CSV histograms output");

    VerifyArgs va;
    auto* ver_cmd = app.add_subcommand("verify", "run a verification suite");
    ver_cmd->add_option("--suite", va.suite, "drift, martingale, lemmas, containment or all");
    ver_cmd->add_option("--kernel", va.kernel, "kernel for kernel-only suites");
    ver_cmd->add_option("--table", va.table, "table file for table-backed suites");
    ver_cmd->add_option("--n-max", va.n_max, "drift check range");
    ver_cmd->add_option("--n", va.n, "pushforward limit for martingale/lemma suites");
    ver_cmd->add_option("--k-max", va.k_max, "rounds of pushforward");
    ver_cmd->add_option("--K", va.K, "free constant of the variance lemma");
    ver_cmd->add_option("--x", va.xs, "containment anchor points");
    ver_cmd->add_option("--round-ties", va.ties, "subsequence rounding: away (default) or even");
    ver_cmd->add_option("--json", va.json_out, "machine-readable report output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help / --version
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (table_cmd->parsed()) return run_table(ta);
        if (env_cmd->parsed()) return run_envelope(ea);
        if (scan_cmd->parsed()) return run_scan(sa);
        if (sim_cmd->parsed()) return run_simulate(ma);
        if (ver_cmd->parsed()) return run_verify(va);
        return kExitUsage;
    } catch (const PrecisionError& e) {
        std::fprintf(stderr, "precision failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const EnvelopeRangeError& e) {
        std::fprintf(stderr, "range error: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
}
