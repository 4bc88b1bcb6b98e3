#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "miturbo/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"miturbo: semi-supervised training on mutual-information bounds"};
    app.require_subcommand(1);

    miturbo::cli::CliOptions opt;
    uint64_t seed_flag = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* c = cmd->add_option("--config", opt.config_path, "run configuration file");
        if (needs_config) c->required();
        cmd->add_option("--out", opt.out_dir, "output directory")
            ->default_val("out");
        cmd->add_option("--threads", opt.threads,
                        "worker threads (fallback: MITURBO_THREADS, then 1)");
        auto* s = cmd->add_option("--seed", seed_flag, "override the run seed");
        return s;
    };

    auto* train = app.add_subcommand("train", "one seeded training run");
    auto* train_seed = add_common(train, true);

    auto* ablate = app.add_subcommand("ablate", "loss-activation ablation sweep");
    add_common(ablate, true);

    auto* verify = app.add_subcommand("verify", "run verification suites");
    std::string suite = "all";
    verify->add_option("suite", suite, "gradcheck | bounds | stability | all");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : miturbo::cli::kExitUsage;
    }

    if (train->parsed()) {
        if (train_seed->count() > 0) opt.seed = seed_flag;
        return miturbo::cli::cmd_train(opt, std::cout, std::cerr);
    }
    if (ablate->parsed()) {
        return miturbo::cli::cmd_ablate(opt, std::cout, std::cerr);
    }
    return miturbo::cli::cmd_verify(suite, std::cout, std::cerr);
}
