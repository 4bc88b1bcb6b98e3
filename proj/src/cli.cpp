#include "miturbo/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "miturbo/verify.hpp"

namespace miturbo::cli {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

int resolve_threads(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("MITURBO_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

std::string metrics_to_jsonl(const trainer::RunMetrics& m) {
    std::string out;
    std::size_t step_at = 0;
    for (std::size_t epoch = 0; epoch < m.epoch_accuracy.size(); ++epoch) {
        while (step_at < m.steps.size() &&
               m.steps[step_at].epoch == static_cast<int>(epoch)) {
            const auto& s = m.steps[step_at++];
            ordered_json j;
            j["kind"] = "step";
            j["step"] = s.step;
            j["epoch"] = s.epoch;
            j["lr"] = s.lr;
            j["total"] = s.total;
            j["supervised"] = s.supervised;
            j["critic_model"] = s.critic_model;
            j["critic_disc"] = s.critic_disc;
            j["latent"] = s.latent;
            j["augment"] = s.augment;
            j["latent_skipped"] = s.latent_skipped;
            out += j.dump();
            out += '\n';
        }
        ordered_json j;
        j["kind"] = "epoch";
        j["epoch"] = epoch;
        j["test_accuracy"] = m.epoch_accuracy[epoch];
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string run_summary_json(const trainer::RunMetrics& m, uint64_t seed) {
    ordered_json j;
    j["seed"] = seed;
    j["final_accuracy"] = m.final_accuracy;
    j["epochs"] = m.epoch_accuracy.size();
    j["steps"] = m.total_steps;
    j["degenerate_batches"] = m.degenerate_batches;
    j["epoch_accuracy"] = m.epoch_accuracy;
    return j.dump(2) + "\n";
}

std::string ablation_report_json(const std::vector<trainer::CellResult>& cells) {
    ordered_json rows = ordered_json::array();
    for (const auto& c : cells) {
        ordered_json j;
        j["cell"] = c.cell.name;
        j["variant"] = trainer::to_string(c.cell.variant);
        j["rescale"] = trainer::to_string(c.cell.rescale);
        j["lambda_critic"] = c.cell.weights.lambda_critic;
        j["lambda_latent"] = c.cell.weights.lambda_latent;
        j["lambda_augment"] = c.cell.weights.lambda_augment;
        j["subset_size"] = c.subset_size;
        j["seeds"] = c.seeds;
        ordered_json accs = ordered_json::array();
        for (std::size_t i = 0; i < c.accuracies.size(); ++i) {
            if (c.errors[i].empty()) {
                accs.push_back(c.accuracies[i]);
            } else {
                accs.push_back(nullptr);
            }
        }
        j["accuracies"] = accs;
        j["failed"] = c.failed;
        if (!c.failed) {
            j["best_seed"] = c.best_seed;
            j["best_accuracy"] = c.best_accuracy;
            j["accuracy_min"] = c.acc_min;
            j["accuracy_max"] = c.acc_max;
        }
        ordered_json errs = ordered_json::array();
        for (const auto& e : c.errors) errs.push_back(e);
        j["errors"] = errs;
        rows.push_back(j);
    }
    ordered_json root;
    root["cells"] = rows;
    return root.dump(2) + "\n";
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
}

struct LoadedRun {
    RunConfig cfg;
    data::Dataset train;
    data::Dataset test;
};

LoadedRun load_run(const CliOptions& opt) {
    LoadedRun r;
    r.cfg = parse_config_file(opt.config_path);
    auto [train, test] = load_datasets(r.cfg.dataset);
    r.train = std::move(train);
    r.test = std::move(test);
    r.cfg.finalize(r.train);
    return r;
}

}  // namespace

int cmd_train(const CliOptions& opt, std::ostream& out, std::ostream& err) {
    LoadedRun run;
    try {
        run = load_run(opt);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    try {
        const uint64_t seed = opt.seed.value_or(run.cfg.train.seeds.front());
        trainer::Trainer t(run.train, run.test, run.cfg.train, run.cfg.encoder,
                           run.cfg.predictor, run.cfg.discriminator, run.cfg.augment,
                           seed);
        const trainer::RunMetrics metrics = t.run();

        fs::create_directories(opt.out_dir);
        write_file(fs::path(opt.out_dir) / "metrics.jsonl", metrics_to_jsonl(metrics));
        write_file(fs::path(opt.out_dir) / "summary.json",
                   run_summary_json(metrics, seed));
        auto named = t.encoder().named_parameters();
        for (auto& np : t.predictor().named_parameters()) named.push_back(np);
        for (auto& np : t.discriminator().named_parameters()) named.push_back(np);
        nn::save_checkpoint((fs::path(opt.out_dir) / "checkpoint.bin").string(),
                            named);

        out << "seed " << seed << ": final accuracy " << std::fixed
            << std::setprecision(4) << metrics.final_accuracy << " after "
            << metrics.total_steps << " steps (" << std::setprecision(1)
            << metrics.wall_seconds << " s)\n";
        return kExitOk;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_ablate(const CliOptions& opt, std::ostream& out, std::ostream& err) {
    LoadedRun run;
    try {
        run = load_run(opt);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    try {
        const auto cells = trainer::default_ablation_cells(
            run.cfg.ablation_lambda_critic, run.cfg.ablation_lambda_latent,
            run.cfg.ablation_lambda_augment);
        const auto results = trainer::run_ablation(
            run.train, run.test, run.cfg.train, run.cfg.encoder, run.cfg.predictor,
            run.cfg.discriminator, run.cfg.augment, cells,
            run.cfg.ablation_subset_sizes, run.cfg.train.seeds,
            resolve_threads(opt.threads));

        fs::create_directories(opt.out_dir);
        for (const auto& cell : results) {
            for (std::size_t i = 0; i < cell.seeds.size(); ++i) {
                if (!cell.errors[i].empty()) continue;
                const std::string name = "run_" + cell.cell.name + "_" +
                                         std::to_string(cell.subset_size) + "_" +
                                         std::to_string(cell.seeds[i]) + ".jsonl";
                write_file(fs::path(opt.out_dir) / name,
                           metrics_to_jsonl(cell.runs[i]));
            }
        }
        write_file(fs::path(opt.out_dir) / "ablation.json",
                   ablation_report_json(results));

        out << std::left << std::setw(22) << "cell" << std::setw(8) << "subset"
            << std::setw(10) << "best" << std::setw(18) << "range" << "status\n";
        bool any_ok = false;
        for (const auto& c : results) {
            out << std::left << std::setw(22) << c.cell.name << std::setw(8)
                << c.subset_size;
            if (c.failed) {
                out << std::setw(10) << "-" << std::setw(18) << "-" << "FAILED\n";
            } else {
                any_ok = true;
                std::ostringstream range;
                range << std::fixed << std::setprecision(4) << c.acc_min << ".."
                      << c.acc_max;
                out << std::fixed << std::setprecision(4) << std::setw(10)
                    << c.best_accuracy << std::setw(18) << range.str() << "ok\n";
            }
        }
        return any_ok ? kExitOk : kExitFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err) {
    std::vector<verify::PropertyResult> results;
    try {
        if (suite == "stability" || suite == "all") {
            auto r = verify::stability_suite();
            results.insert(results.end(), r.begin(), r.end());
        }
        if (suite == "bounds" || suite == "all") {
            auto r = verify::bounds_suite();
            results.insert(results.end(), r.begin(), r.end());
            auto f = verify::infonce_floor_suite();
            results.insert(results.end(), f.begin(), f.end());
        }
        if (suite == "gradcheck" || suite == "all") {
            auto r = verify::gradcheck_suite();
            results.insert(results.end(), r.begin(), r.end());
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    if (results.empty()) {
        err << "error: unknown suite '" << suite
            << "' (expected gradcheck, bounds, stability or all)\n";
        return kExitUsage;
    }
    bool all_pass = true;
    for (const auto& r : results) {
        all_pass = all_pass && r.pass;
        out << (r.pass ? "[PASS] " : "[FAIL] ") << std::left << std::setw(42)
            << r.name << " margin=" << std::scientific << std::setprecision(3)
            << r.margin << " threshold=" << r.threshold;
        if (!r.detail.empty()) out << "  (" << r.detail << ")";
        out << "\n";
    }
    out << (all_pass ? "all properties passed\n" : "some properties FAILED\n");
    return all_pass ? kExitOk : kExitFailure;
}

}  // namespace miturbo::cli
