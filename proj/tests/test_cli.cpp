#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "miturbo/cli.hpp"
#include "miturbo/config.hpp"

using namespace miturbo;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const char* kTinyConfig = R"(
# desk-scale smoke configuration
[dataset]
type = blobs
classes = 4
per_class = 50
dim = 6
separation = 6.0
seed = 3
train_per_class = 40

[encoder]
feature_dim = 8
n_patch_tokens = 2
token_dim = 4
projector_hidden = 10
dropout = 0.2

[predictor]
hidden = 8

[discriminator]
hidden = 8

[train]
epochs = 1
batch_size = 20
base_lr = 0.002
warmup_steps = 5
seeds = 11, 12
variant = cat-cross
rescale = softmax
subset_size = 20

[augment]
ops = noise
noise_sigma = 0.2

[ablation]
subset_sizes = 20
lambda_critic = 0.1
lambda_latent = 0.1
lambda_augment = 0.1
)";

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

fs::path write_config(const TempDir& dir, const std::string& text) {
    const fs::path p = dir.path / "run.cfg";
    std::ofstream f(p);
    f << text;
    return p;
}

}  // namespace

TEST_CASE("config parsing defaults and overrides") {
    const auto cfg = cli::parse_config_text(kTinyConfig);
    CHECK(cfg.dataset.type == "blobs");
    CHECK(cfg.dataset.classes == 4);
    CHECK(cfg.encoder.projector_hidden == 10);
    CHECK(cfg.train.seeds == std::vector<uint64_t>{11, 12});
    CHECK(cfg.train.subset_size == 20);
    CHECK(cfg.augment.gaussian_noise);
    CHECK_FALSE(cfg.augment.resize_crop);
    CHECK(cfg.ablation_subset_sizes == std::vector<int>{20});

    // Defaults survive an empty document.
    const auto defaults = cli::parse_config_text("");
    CHECK(defaults.train.epochs == 5);
    CHECK(defaults.train.base_lr == Approx(5e-5));
    CHECK(defaults.train.warmup_steps == 150);
    CHECK(defaults.train.seeds == std::vector<uint64_t>{42, 1337, 3435});
    CHECK(defaults.encoder.dropout_p == Approx(0.3));
    CHECK(defaults.encoder.leaky_slope == Approx(0.01));
}

TEST_CASE("config rejects unknown keys naming them") {
    CHECK_THROWS_WITH_AS(cli::parse_config_text("[train]\nepochz = 3\n"),
                         doctest::Contains("train.epochz"), cli::ConfigError);
    CHECK_THROWS_WITH_AS(cli::parse_config_text("[nosuch]\nx = 1\n"),
                         doctest::Contains("nosuch"), cli::ConfigError);
    CHECK_THROWS_WITH_AS(cli::parse_config_text("orphan = 1\n"),
                         doctest::Contains("orphan"), cli::ConfigError);
    CHECK_THROWS_WITH_AS(cli::parse_config_text("[train]\nepochs = abc\n"),
                         doctest::Contains("train.epochs"), cli::ConfigError);
    CHECK_THROWS_WITH_AS(cli::parse_config_text("[augment]\nops = sharpen\n"),
                         doctest::Contains("sharpen"), cli::ConfigError);
}

TEST_CASE("finalize derives dims from the dataset") {
    auto cfg = cli::parse_config_text(kTinyConfig);
    auto [train, test] = cli::load_datasets(cfg.dataset);
    CHECK(train.n == 160);
    CHECK(test.n == 40);
    cfg.finalize(train);
    CHECK(cfg.encoder.input_dim == 6);
    CHECK(cfg.predictor.n_classes == 4);
    CHECK(cfg.predictor.latent_dim == 10);
    CHECK(cfg.discriminator.input_dim == 4);
    CHECK_FALSE(cfg.augment.clamp_output);  // vector data, auto clamp off
}

TEST_CASE("cmd_train writes deterministic metrics and summary") {
    TempDir dir("miturbo_cli_train");
    const auto cfg_path = write_config(dir, kTinyConfig);

    cli::CliOptions opt;
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir.path / "out1").string();
    std::ostringstream out, err;
    REQUIRE(cli::cmd_train(opt, out, err) == cli::kExitOk);
    INFO(err.str());
    CHECK(out.str().find("final accuracy") != std::string::npos);

    opt.out_dir = (dir.path / "out2").string();
    REQUIRE(cli::cmd_train(opt, out, err) == cli::kExitOk);

    // Same seed and config: byte-identical outputs.
    CHECK(slurp(dir.path / "out1" / "metrics.jsonl") ==
          slurp(dir.path / "out2" / "metrics.jsonl"));
    CHECK(slurp(dir.path / "out1" / "summary.json") ==
          slurp(dir.path / "out2" / "summary.json"));

    // A different seed changes the metrics.
    opt.seed = 999;
    opt.out_dir = (dir.path / "out3").string();
    REQUIRE(cli::cmd_train(opt, out, err) == cli::kExitOk);
    CHECK(slurp(dir.path / "out1" / "metrics.jsonl") !=
          slurp(dir.path / "out3" / "metrics.jsonl"));

    // Summary mentions accuracy in [0,1].
    const std::string summary = slurp(dir.path / "out1" / "summary.json");
    CHECK(summary.find("\"final_accuracy\"") != std::string::npos);

    // A loadable parameter checkpoint is emitted alongside the metrics.
    CHECK(fs::exists(dir.path / "out1" / "checkpoint.bin"));
    CHECK(slurp(dir.path / "out1" / "checkpoint.bin") ==
          slurp(dir.path / "out2" / "checkpoint.bin"));
}

TEST_CASE("cmd_train config errors exit with code 2") {
    cli::CliOptions opt;
    opt.config_path = "/nonexistent/config.cfg";
    std::ostringstream out, err;
    CHECK(cli::cmd_train(opt, out, err) == cli::kExitUsage);
    CHECK(err.str().find("config not found") != std::string::npos);

    TempDir dir("miturbo_cli_badkey");
    opt.config_path = write_config(dir, "[train]\nboom = 1\n").string();
    std::ostringstream err2;
    CHECK(cli::cmd_train(opt, out, err2) == cli::kExitUsage);
    CHECK(err2.str().find("train.boom") != std::string::npos);
}

TEST_CASE("cmd_ablate emits the report with one row per cell and subset") {
    TempDir dir("miturbo_cli_ablate");
    const auto cfg_path = write_config(dir, kTinyConfig);
    cli::CliOptions opt;
    opt.config_path = cfg_path.string();
    opt.out_dir = (dir.path / "out").string();
    opt.threads = 2;
    std::ostringstream out, err;
    REQUIRE(cli::cmd_ablate(opt, out, err) == cli::kExitOk);

    const std::string report = slurp(dir.path / "out" / "ablation.json");
    // 7 activation cells x 1 subset size.
    std::size_t rows = 0, at = 0;
    while ((at = report.find("\"cell\"", at)) != std::string::npos) {
        ++rows;
        at += 6;
    }
    CHECK(rows == 7);
    CHECK(fs::exists(dir.path / "out" / "run_baseline_20_11.jsonl"));
    CHECK(fs::exists(dir.path / "out" / "run_+augment_20_12.jsonl"));
}

TEST_CASE("cmd_verify stability suite passes and reports margins") {
    std::ostringstream out, err;
    CHECK(cli::cmd_verify("stability", out, err) == cli::kExitOk);
    CHECK(out.str().find("[PASS]") != std::string::npos);
    CHECK(out.str().find("margin=") != std::string::npos);
    CHECK(out.str().find("[FAIL]") == std::string::npos);

    std::ostringstream out2, err2;
    CHECK(cli::cmd_verify("nonsense", out2, err2) == cli::kExitUsage);
}

TEST_CASE("thread resolution: flag beats env beats default") {
    unsetenv("MITURBO_THREADS");
    CHECK(cli::resolve_threads(0) == 1);
    setenv("MITURBO_THREADS", "3", 1);
    CHECK(cli::resolve_threads(0) == 3);
    CHECK(cli::resolve_threads(5) == 5);
    setenv("MITURBO_THREADS", "garbage", 1);
    CHECK(cli::resolve_threads(0) == 1);
    unsetenv("MITURBO_THREADS");
}

TEST_CASE("metrics serialisation is stable and omits wall time") {
    trainer::RunMetrics m;
    trainer::StepRecord s;
    s.step = 0;
    s.epoch = 0;
    s.lr = 0.25;
    s.total = 1.5;
    s.supervised = 1.5;
    m.steps.push_back(s);
    m.epoch_accuracy.push_back(0.75);
    m.final_accuracy = 0.75;
    m.total_steps = 1;
    m.wall_seconds = 123.456;  // must not appear anywhere
    const std::string jsonl = cli::metrics_to_jsonl(m);
    CHECK(jsonl ==
          "{\"kind\":\"step\",\"step\":0,\"epoch\":0,\"lr\":0.25,\"total\":1.5,"
          "\"supervised\":1.5,\"critic_model\":0.0,\"critic_disc\":0.0,"
          "\"latent\":0.0,\"augment\":0.0,\"latent_skipped\":0}\n"
          "{\"kind\":\"epoch\",\"epoch\":0,\"test_accuracy\":0.75}\n");
    CHECK(cli::run_summary_json(m, 7).find("123.456") == std::string::npos);
}
