#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "miturbo/config.hpp"
#include "miturbo/trainer.hpp"

namespace miturbo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or run failure
inline constexpr int kExitUsage = 2;    // usage / config errors

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<uint64_t> seed;
    int threads = 0;  // 0 -> MITURBO_THREADS env, else 1
};

// --threads beats the MITURBO_THREADS environment variable; default 1.
int resolve_threads(int flag_value);

// Deterministic serialisations (no wall time, stable key order) shared by
// the commands and the acceptance harness.
std::string metrics_to_jsonl(const trainer::RunMetrics& m);
std::string run_summary_json(const trainer::RunMetrics& m, uint64_t seed);
std::string ablation_report_json(const std::vector<trainer::CellResult>& cells);

int cmd_train(const CliOptions& opt, std::ostream& out, std::ostream& err);
int cmd_ablate(const CliOptions& opt, std::ostream& out, std::ostream& err);
// suite: gradcheck | bounds | stability | all
int cmd_verify(const std::string& suite, std::ostream& out, std::ostream& err);

}  // namespace miturbo::cli
