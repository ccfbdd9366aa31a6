// One-shot driver for the long n_max = 6000 flagship table with
// checkpoint/resume, so the hours-scale run can be interrupted safely.
// The same flow is available through `selfavg table --resume`.
#include "selfavg/recursion.hpp"
#include "selfavg/table_io.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

using namespace selfavg;

int main(int argc, char** argv) {
    const long n_max = argc > 1 ? std::atol(argv[1]) : 6000;
    const std::string out = argc > 2 ? argv[2] : "build/table_roulette_6000.native.json";
    const std::string ckpt = out + ".ckpt";

    RouletteKernel kernel;
    PrecisionConfig cfg;
    cfg.initial_bits = 256;
    cfg.max_bits = 6144;

    if (std::filesystem::exists(out)) {
        std::printf("already complete: %s\n", out.c_str());
        return 0;
    }

    SequenceTable resume;
    BuildOptions opts;
    opts.threads = 2;
    opts.checkpoint_every = 100;
    if (std::filesystem::exists(ckpt)) {
        resume = load_table(ckpt, true);
        opts.resume_from = &resume;
        std::printf("resuming from n = %ld\n", resume.n_max);
    }
    const auto t0 = std::chrono::steady_clock::now();
    opts.on_checkpoint = [&](const SequenceTable& t, long n_done) {
        SequenceTable partial = t;
        partial.n_max = n_done;
        partial.values.resize(static_cast<size_t>(n_done) + 1);
        partial.residuals.resize(static_cast<size_t>(n_done) + 1);
        partial.row_bits.resize(static_cast<size_t>(n_done) + 1);
        save_table(partial, ckpt, TableFormat::native);
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%8.0fs] checkpoint at n = %ld\n", dt, n_done);
        std::fflush(stdout);
    };
    const auto table = build_table(kernel, n_max, cfg, opts);
    save_table(table, out, TableFormat::native);
    std::filesystem::remove(ckpt);
    std::printf("done: %s (max residual %.3e)\n", out.c_str(), table.residual_max());
    return 0;
}
