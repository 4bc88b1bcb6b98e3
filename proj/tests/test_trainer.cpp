#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "miturbo/trainer.hpp"

using namespace miturbo;
using trainer::LossVariant;
using trainer::TrainConfig;
using trainer::Trainer;
using doctest::Approx;

namespace {

struct Fixture {
    data::Dataset train, test;
    TrainConfig tcfg;
    nn::EncoderConfig ecfg;
    nn::PredictorConfig pcfg;
    nn::DiscriminatorConfig dcfg;
    data::AugmentationConfig aug = data::AugmentationConfig::vector_defaults(0.3);

    Fixture() {
        auto [tr, te] = data::split_per_class(data::gen_blobs(5, 60, 8, 6.0, 17), 50);
        train = std::move(tr);
        test = std::move(te);
        tcfg.epochs = 1;
        tcfg.batch_size = 25;
        tcfg.base_lr = 3e-3;
        tcfg.warmup_steps = 10;
        tcfg.subset_size = 25;
        ecfg.input_dim = 8;
        ecfg.feature_dim = 8;
        ecfg.n_patch_tokens = 2;
        ecfg.token_dim = 4;
        ecfg.projector_hidden = 12;
        pcfg.latent_dim = 12;
        pcfg.hidden = 8;
        pcfg.n_classes = 5;
        dcfg.input_dim = 5;
        dcfg.hidden = 8;
    }

    Trainer make(uint64_t seed) const {
        return Trainer(train, test, tcfg, ecfg, pcfg, dcfg, aug, seed);
    }
};

std::vector<double> snapshot(const std::vector<nn::Tensor>& params) {
    std::vector<double> flat;
    for (const auto& p : params) {
        flat.insert(flat.end(), p.values().begin(), p.values().end());
    }
    return flat;
}

}  // namespace

TEST_CASE("all-zero weights behave as the pure supervised baseline") {
    Fixture fx;
    Trainer t = fx.make(1);
    const auto before_disc = snapshot(t.discriminator().parameters());
    const auto rec = t.train_step(t.sampler().next());
    CHECK(rec.critic_disc == 0.0);
    CHECK(rec.critic_model == 0.0);
    CHECK(rec.latent == 0.0);
    CHECK(rec.augment == 0.0);
    CHECK(rec.total == Approx(rec.supervised));
    // No critic gradient: the discriminator never moves.
    CHECK(snapshot(t.discriminator().parameters()) == before_disc);
}

TEST_CASE("critic weight moves the discriminator, zero weight does not") {
    Fixture fx;
    fx.tcfg.weights.lambda_critic = 0.1;
    Trainer t = fx.make(2);
    const auto before = snapshot(t.discriminator().parameters());
    const auto rec = t.train_step(t.sampler().next());
    CHECK(rec.critic_disc != 0.0);
    CHECK(snapshot(t.discriminator().parameters()) != before);
    CHECK(rec.total ==
          Approx(rec.supervised + 0.1 * rec.critic_model).epsilon(1e-12));
}

TEST_CASE("full loss produces all components and a finite total") {
    Fixture fx;
    fx.tcfg.variant = LossVariant::BinCross;
    fx.tcfg.rescale = densities::RescaleKind::Sigmoid;
    fx.tcfg.weights.lambda_critic = 0.1;
    fx.tcfg.weights.lambda_latent = 0.1;
    fx.tcfg.weights.lambda_augment = 0.1;
    Trainer t = fx.make(3);
    const auto rec = t.train_step(t.sampler().next());
    for (double v : {rec.total, rec.supervised, rec.critic_model, rec.critic_disc,
                     rec.latent, rec.augment}) {
        CHECK(std::isfinite(v));
    }
    CHECK(rec.total == Approx(rec.supervised + 0.1 * rec.critic_model +
                              0.1 * rec.latent + 0.1 * rec.augment)
                           .epsilon(1e-12));
}

TEST_CASE("twin variant works with both denominator choices") {
    Fixture fx;
    fx.tcfg.variant = LossVariant::CatTwin;
    for (auto denom : {trainer::TwinDenominator::Unlabelled,
                       trainer::TwinDenominator::Labelled}) {
        fx.tcfg.twin_denominator = denom;
        Trainer t = fx.make(4);
        const auto rec = t.train_step(t.sampler().next());
        CHECK(std::isfinite(rec.supervised));
    }
}

TEST_CASE("two runs with the same seed give identical metrics") {
    Fixture fx;
    fx.tcfg.weights.lambda_critic = 0.05;
    fx.tcfg.weights.lambda_latent = 0.1;
    const auto a = fx.make(42).run();
    const auto b = fx.make(42).run();
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].total == b.steps[i].total);  // bit-identical
        CHECK(a.steps[i].supervised == b.steps[i].supervised);
    }
    CHECK(a.epoch_accuracy == b.epoch_accuracy);
    CHECK(a.final_accuracy == b.final_accuracy);

    const auto c = fx.make(43).run();
    CHECK(a.steps.front().supervised != c.steps.front().supervised);
}

TEST_CASE("non-finite loss aborts with the component name") {
    Fixture fx;
    Trainer t = fx.make(5);
    // Poison the encoder so logits overflow.
    auto params = t.encoder().parameters();
    for (double& v : params.front().mutable_values()) v = 1e160;
    CHECK_THROWS_WITH_AS(t.train_step(t.sampler().next()),
                         doctest::Contains("loss_supervised"),
                         trainer::TrainAbort);
}

TEST_CASE("evaluate_accuracy on a constant-class predictor") {
    Fixture fx;
    Trainer t = fx.make(6);
    // Zero every model parameter: logits are constant, argmax resolves to
    // class 0 everywhere, and accuracy equals class 0's test share.
    for (auto group : {t.encoder().parameters(), t.predictor().parameters()}) {
        for (nn::Tensor p : group) {
            for (double& v : p.mutable_values()) v = 0.0;
        }
    }
    CHECK(t.evaluate_accuracy() == Approx(1.0 / 5.0));
}

TEST_CASE("training learns separable blobs quickly") {
    Fixture fx;
    fx.tcfg.epochs = 4;
    Trainer t = fx.make(7);
    const auto metrics = t.run();
    CHECK(metrics.total_steps == 4 * (fx.train.n / fx.tcfg.batch_size));
    CHECK(metrics.final_accuracy > 0.5);  // 5 well-separated classes
    CHECK(metrics.epoch_accuracy.size() == 4);
}

TEST_CASE("widely separated blobs reach the reference-oracle level") {
    // Reference oracle: nearest class centroid gets > 0.99 at separation 10
    // (verified in the data suite); the trained model must clear 0.95.
    auto [train, test] = data::split_per_class(data::gen_blobs(10, 220, 8, 10.0, 23), 200);
    TrainConfig tcfg;
    tcfg.epochs = 6;
    tcfg.batch_size = 64;
    tcfg.base_lr = 3e-3;
    tcfg.warmup_steps = 30;
    tcfg.subset_size = 100;
    nn::EncoderConfig ecfg;
    ecfg.input_dim = 8;
    ecfg.feature_dim = 16;
    ecfg.n_patch_tokens = 2;
    ecfg.token_dim = 8;
    ecfg.projector_hidden = 32;
    nn::PredictorConfig pcfg;
    pcfg.latent_dim = 32;
    pcfg.hidden = 16;
    pcfg.n_classes = 10;
    nn::DiscriminatorConfig dcfg;
    dcfg.input_dim = 10;
    dcfg.hidden = 8;
    Trainer t(train, test, tcfg, ecfg, pcfg, dcfg,
              data::AugmentationConfig::vector_defaults(0.3), 42);
    CHECK(t.run().final_accuracy > 0.95);
}

TEST_CASE("warmup learning rate is applied per step") {
    Fixture fx;
    fx.tcfg.warmup_steps = 4;
    fx.tcfg.warmup_factor = 0.5;
    Trainer t = fx.make(8);
    const auto r0 = t.train_step(t.sampler().next());
    const auto r1 = t.train_step(t.sampler().next());
    CHECK(r0.lr == Approx(fx.tcfg.base_lr * 0.5));
    CHECK(r1.lr == Approx(fx.tcfg.base_lr * (0.5 + 0.5 * 0.25)));
}

TEST_CASE("run_ablation grid shape, failure marking and determinism") {
    Fixture fx;
    fx.tcfg.epochs = 1;
    std::vector<trainer::AblationCell> cells;
    cells.push_back({"baseline", LossVariant::CatCross,
                     densities::RescaleKind::Softmax, {}});
    losses::LossWeights w;
    w.lambda_critic = 0.1;
    cells.push_back({"critic", LossVariant::CatCross,
                     densities::RescaleKind::Softmax, w});

    // Second subset size is larger than the dataset: every run in those
    // cells fails, is recorded, and the sweep continues.
    const std::vector<int> subsets{25, 100000};
    const std::vector<uint64_t> seeds{1, 2};
    const auto results =
        trainer::run_ablation(fx.train, fx.test, fx.tcfg, fx.ecfg, fx.pcfg,
                              fx.dcfg, fx.aug, cells, subsets, seeds, 2);
    REQUIRE(results.size() == cells.size() * subsets.size());
    for (const auto& r : results) {
        if (r.subset_size == 25) {
            CHECK_FALSE(r.failed);
            CHECK(r.accuracies.size() == 2);
            CHECK(r.best_accuracy >= r.acc_min);
            CHECK(r.best_accuracy == r.acc_max);
            for (const auto& e : r.errors) CHECK(e.empty());
        } else {
            CHECK(r.failed);
            for (const auto& e : r.errors) CHECK_FALSE(e.empty());
        }
    }

    // Thread count must not change the numbers.
    const auto serial =
        trainer::run_ablation(fx.train, fx.test, fx.tcfg, fx.ecfg, fx.pcfg,
                              fx.dcfg, fx.aug, cells, {25}, seeds, 1);
    const auto threaded =
        trainer::run_ablation(fx.train, fx.test, fx.tcfg, fx.ecfg, fx.pcfg,
                              fx.dcfg, fx.aug, cells, {25}, seeds, 4);
    REQUIRE(serial.size() == threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].accuracies == threaded[i].accuracies);
    }
}

TEST_CASE("default ablation cells follow the activation order") {
    const auto cells = trainer::default_ablation_cells(0.5, 0.25, 0.125);
    REQUIRE(cells.size() == 7);
    CHECK(cells[0].name == "baseline");
    CHECK(cells[0].variant == LossVariant::CatCross);
    CHECK(cells[0].weights.lambda_critic == 0.0);
    CHECK(cells[1].variant == LossVariant::CatTwin);
    CHECK(cells[2].rescale == densities::RescaleKind::Sigmoid);
    CHECK(cells[3].variant == LossVariant::BinCross);
    CHECK(cells[4].weights.lambda_critic == 0.5);
    CHECK(cells[4].weights.lambda_latent == 0.0);
    CHECK(cells[5].weights.lambda_latent == 0.25);
    CHECK(cells[6].weights.lambda_augment == 0.125);
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.epochs = 0;
    CHECK_THROWS(cfg.validate());
    cfg = TrainConfig{};
    cfg.seeds.clear();
    CHECK_THROWS(cfg.validate());
    cfg = TrainConfig{};
    cfg.weights.lambda_latent = -0.5;
    CHECK_THROWS(cfg.validate());
}
