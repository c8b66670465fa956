#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "runsup/app.hpp"
#include "runsup/parallel.hpp"

int main(int argc, char** argv) {
    CLI::App app{"runsup: joint law of a drifted diffusion and its running supremum"};
    app.require_subcommand(1);

    runsup::CommonOptions opt;
    if (const char* env = std::getenv("RUNSUP_OUT_DIR")) opt.out_dir = env;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opt.config_path, "configuration file");
        if (needs_config) c->required();
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--threads", opt.threads, "worker threads (0 = hardware)");
        cmd->add_option("--gate-scale", opt.gate_scale, "scale factor on verification gates");
        cmd->add_option_function<std::uint64_t>(
            "--seed",
            [&](const std::uint64_t& s) {
                opt.seed = s;
                opt.seed_set = true;
            },
            "RNG seed (overrides config)");
    };

    std::string inject_fault;
    CLI::App* selftest = app.add_subcommand("selftest", "kernel-algebra property suite");
    selftest->add_option("--inject-fault", inject_fault,
                         "test fixture: inject a known defect (gamma_sign)");
    add_common(selftest, false);

    CLI::App* density = app.add_subcommand("density", "compute a joint density grid");
    add_common(density, true);

    std::vector<std::string> density_files;
    CLI::App* verify = app.add_subcommand("verify", "run PDE residual diagnostics on densities");
    verify->add_option("files", density_files, "density CSV file(s)")->required();
    add_common(verify, true);

    CLI::App* price = app.add_subcommand("price", "lookback / barrier pricing with cross-checks");
    add_common(price, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (opt.threads > 0) runsup::set_thread_count(opt.threads);
        if (selftest->parsed()) return runsup::cmd_selftest(std::cout, inject_fault);
        if (density->parsed()) return runsup::cmd_density(opt, std::cout);
        if (verify->parsed()) return runsup::cmd_verify(opt, density_files, std::cout);
        if (price->parsed()) return runsup::cmd_price(opt, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
