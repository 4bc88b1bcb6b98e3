#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "miturbo/densities.hpp"
#include "miturbo/losses.hpp"
#include "miturbo/verify.hpp"

using namespace miturbo;
using losses::InfoNceAxis;
using losses::Labels;
using losses::LossWeights;
using densities::RescaleKind;
using nn::Tensor;
using doctest::Approx;

namespace {

constexpr double kLn2 = 0.69314718055994530942;
std::mt19937_64 g_rng(2024);

Tensor random_matrix(int n, int c, double scale = 2.0, bool grad = false) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(static_cast<std::size_t>(n) * c);
    for (double& x : v) x = dist(g_rng);
    return Tensor::from({n, c}, std::move(v), grad);
}

}  // namespace

TEST_CASE("loss_cat_cross values") {
    // Uniform logits over 10 classes.
    Tensor uniform = Tensor::zeros({3, 10});
    CHECK(losses::loss_cat_cross(uniform, {1, 5, 9}, RescaleKind::Softmax).item() ==
          Approx(std::log(10.0)).epsilon(1e-13));
    // Frozen from -log softmax([2,1,0])[0].
    Tensor row = Tensor::from({1, 3}, {2.0, 1.0, 0.0});
    CHECK(losses::loss_cat_cross(row, {0}, RescaleKind::Softmax).item() ==
          Approx(0.40760596444438030).epsilon(1e-13));
    // Equality with zero only in the infinite-margin limit; margin 20 is
    // already below 1e-6.
    Tensor hot = Tensor::from({1, 3}, {20.0, 0.0, 0.0});
    CHECK(losses::loss_cat_cross(hot, {0}, RescaleKind::Softmax).item() < 1e-6);
    CHECK(losses::loss_cat_cross(hot, {0}, RescaleKind::Softmax).item() > 0.0);
}

TEST_CASE("loss_cat_cross softmax is non-negative on random batches") {
    for (int t = 0; t < 100; ++t) {
        const int n = 1 + t % 6, c = 2 + t % 5;
        Tensor logits = random_matrix(n, c, 5.0);
        Labels labels(n);
        for (int i = 0; i < n; ++i) labels[i] = (t + i) % c;
        CHECK(losses::loss_cat_cross(logits, labels, RescaleKind::Softmax).item() >=
              0.0);
    }
}

TEST_CASE("loss_cat_twin reference values") {
    SUBCASE("identical rows cancel numerator and denominator") {
        Tensor logits = Tensor::from({3, 2}, {1.2, -0.4, 1.2, -0.4, 1.2, -0.4});
        for (auto kind : {RescaleKind::Softmax, RescaleKind::Sigmoid}) {
            CHECK(losses::loss_cat_twin(logits, {0, 0, 0}, logits, kind).item() ==
                  Approx(0.0).epsilon(1e-13));
        }
    }
    SUBCASE("single-row batch is exactly zero with zero gradient") {
        Tensor logits = Tensor::from({1, 3}, {2.0, -1.0, 0.5}, true);
        Tensor loss =
            losses::loss_cat_twin(logits, {1}, logits, RescaleKind::Softmax);
        CHECK(loss.item() == Approx(0.0).epsilon(1e-14));
        loss.backward();
        for (double g : logits.grad()) CHECK(g == Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("two rows with class-0 probabilities 0.9 and 0.5") {
        // Logits chosen so softmax class-0 probabilities are exactly 0.9
        // and 0.5; the marginal is 0.7. Frozen from brute-force evaluation
        // of -mean[ln(0.9/0.7), ln(0.5/0.7)].
        Tensor logits = Tensor::from({2, 2}, {std::log(9.0), 0.0, 0.0, 0.0});
        CHECK(losses::loss_cat_twin(logits, {0, 0}, logits, RescaleKind::Softmax)
                  .item() == Approx(0.042578904170153426).epsilon(1e-12));
    }
}

TEST_CASE("loss_bin_cross values") {
    Tensor z = Tensor::zeros({1, 2});
    CHECK(losses::loss_bin_cross(z, {0}, RescaleKind::Sigmoid).item() ==
          Approx(2.0 * kLn2).epsilon(1e-13));
    CHECK(losses::loss_bin_cross(z, {0}, RescaleKind::Softmax).item() ==
          Approx(2.0 * kLn2).epsilon(1e-13));
    // Frozen from -2 log(sigmoid(3)).
    Tensor pm3 = Tensor::from({1, 2}, {3.0, -3.0});
    CHECK(losses::loss_bin_cross(pm3, {0}, RescaleKind::Sigmoid).item() ==
          Approx(0.097174703147484118).epsilon(1e-12));
    // Frozen from -(ln 0.1 + 9 ln 0.9) for uniform 10-class softmax.
    Tensor u10 = Tensor::zeros({1, 10});
    CHECK(losses::loss_bin_cross(u10, {3}, RescaleKind::Softmax).item() ==
          Approx(3.2508297339144824).epsilon(1e-12));
    // Non-negative: it is a negative log-probability.
    for (int t = 0; t < 50; ++t) {
        Tensor logits = random_matrix(3, 4, 6.0);
        for (auto kind : {RescaleKind::Softmax, RescaleKind::Sigmoid}) {
            CHECK(losses::loss_bin_cross(logits, {0, 1, 2}, kind).item() >= 0.0);
        }
    }
}

TEST_CASE("losses agree with the pure log-domain densities") {
    // Dual route: the autodiff implementation must reproduce the values of
    // the scalar density functions it is built from.
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + t % 5, c = 2 + t % 4;
        Tensor logits = random_matrix(n, c, 4.0);
        Labels labels(n);
        for (int i = 0; i < n; ++i) labels[i] = (i + t) % c;
        densities::LogitBatch batch(n, c, logits.values());
        for (auto kind : {RescaleKind::Softmax, RescaleKind::Sigmoid}) {
            double cat = 0.0, bin = 0.0, twin = 0.0;
            for (int i = 0; i < n; ++i) {
                const densities::OneHot y(labels[i], c);
                cat -= densities::log_conditional(batch.row(i), y, kind);
                bin -= densities::log_binary_conditional(batch.row(i), y, kind);
                twin -= densities::log_conditional(batch.row(i), y, kind) -
                        densities::log_marginal(batch, y, kind);
            }
            CHECK(losses::loss_cat_cross(logits, labels, kind).item() ==
                  Approx(cat / n).epsilon(1e-12));
            CHECK(losses::loss_bin_cross(logits, labels, kind).item() ==
                  Approx(bin / n).epsilon(1e-12));
            CHECK(losses::loss_cat_twin(logits, labels, logits, kind).item() ==
                  Approx(twin / n).epsilon(1e-12));
        }
    }
}

TEST_CASE("loss_infonce reference values") {
    Tensor zeros = Tensor::zeros({4, 4});
    CHECK(losses::loss_infonce(zeros, InfoNceAxis::OverTargets).item() ==
          Approx(0.0).epsilon(1e-14));
    // Frozen from -log(2 / (1 + e^-10)).
    Tensor sharp = Tensor::from({2, 2}, {10.0, 0.0, 0.0, 10.0});
    CHECK(losses::loss_infonce(sharp, InfoNceAxis::OverTargets).item() ==
          Approx(-0.69310178166072844).epsilon(1e-12));
    // Single positive pair: the ratio is always 1.
    Tensor one = Tensor::from({1, 1}, {123.4});
    CHECK(losses::loss_infonce(one, InfoNceAxis::OverTargets).item() ==
          Approx(0.0).epsilon(1e-14));
    CHECK(losses::loss_infonce(one, InfoNceAxis::OverSources).item() ==
          Approx(0.0).epsilon(1e-14));
    CHECK_THROWS(losses::loss_infonce(Tensor::zeros({2, 3}),
                                      InfoNceAxis::OverTargets));
}

TEST_CASE("loss_infonce floor and axis behaviour") {
    SUBCASE("floor -log N on random matrices") {
        std::uniform_int_distribution<int> size(1, 16);
        std::uniform_real_distribution<double> score(-30.0, 30.0);
        for (int t = 0; t < 2000; ++t) {
            const int n = size(g_rng);
            std::vector<double> v(static_cast<std::size_t>(n) * n);
            for (double& x : v) x = score(g_rng);
            Tensor s = Tensor::from({n, n}, std::move(v));
            for (auto axis : {InfoNceAxis::OverTargets, InfoNceAxis::OverSources}) {
                CHECK(losses::loss_infonce(s, axis).item() >=
                      -std::log(static_cast<double>(n)) - 1e-12);
            }
        }
    }
    SUBCASE("axes differ on an asymmetric matrix") {
        Tensor s = Tensor::from({2, 2}, {1.0, 5.0, -3.0, 0.5});
        const double t = losses::loss_infonce(s, InfoNceAxis::OverTargets).item();
        const double u = losses::loss_infonce(s, InfoNceAxis::OverSources).item();
        CHECK(std::abs(t - u) > 1e-3);
    }
    SUBCASE("score scale acts as an inverse temperature") {
        Tensor s = Tensor::from({2, 2}, {5.0, 0.0, 0.0, 5.0});
        Tensor doubled = Tensor::from({2, 2}, {10.0, 0.0, 0.0, 10.0});
        CHECK(losses::loss_infonce(s, InfoNceAxis::OverTargets, 2.0).item() ==
              Approx(losses::loss_infonce(doubled, InfoNceAxis::OverTargets).item())
                  .epsilon(1e-13));
        CHECK_THROWS(losses::loss_infonce(s, InfoNceAxis::OverTargets, 0.0));
    }
    SUBCASE("axes coincide on symmetric matrices") {
        for (int t = 0; t < 50; ++t) {
            const int n = 2 + t % 6;
            Tensor raw = random_matrix(n, n, 3.0);
            Tensor sym = nn::add(raw, nn::transpose(raw));
            CHECK(losses::loss_infonce(sym, InfoNceAxis::OverTargets).item() ==
                  Approx(losses::loss_infonce(sym, InfoNceAxis::OverSources).item())
                      .epsilon(1e-12));
        }
    }
}

TEST_CASE("loss_latent_supervised") {
    SUBCASE("identical latents, one class: all scores equal, loss zero") {
        Tensor latents = Tensor::from({3, 2}, {1.0, 2.0, 1.0, 2.0, 1.0, 2.0});
        nn::Rng rng(1);
        auto res = losses::loss_latent_supervised(latents, {0, 0, 0}, rng);
        CHECK_FALSE(res.degenerate);
        CHECK(res.anchors_used == 3);
        CHECK(res.loss.item() == Approx(0.0).epsilon(1e-13));
    }
    SUBCASE("two orthogonal classes, frozen brute-force value") {
        // Within-class identical vectors on orthogonal axes; the 4x4 cosine
        // matrix has 1 on same-class entries and 0 across. Frozen from the
        // brute-force evaluation -log(2e/(e+1)) per anchor.
        Tensor latents = Tensor::from(
            {4, 2}, {1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0});
        nn::Rng rng(2);
        auto res = losses::loss_latent_supervised(latents, {0, 0, 1, 1}, rng);
        CHECK(res.loss.item() == Approx(-0.37988549304172248).epsilon(1e-12));
    }
    SUBCASE("singleton classes only: degenerate flag and zero loss") {
        Tensor latents = Tensor::from({3, 2}, {1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
        nn::Rng rng(3);
        auto res = losses::loss_latent_supervised(latents, {0, 1, 2}, rng);
        CHECK(res.degenerate);
        CHECK(res.anchors_used == 0);
        CHECK(res.anchors_skipped == 3);
        CHECK(res.loss.item() == Approx(0.0));
    }
    SUBCASE("mixed: singleton anchors are skipped, the rest contribute") {
        Tensor latents = random_matrix(5, 3, 1.0);
        nn::Rng rng(4);
        auto res = losses::loss_latent_supervised(latents, {0, 0, 1, 0, 2}, rng);
        CHECK(res.anchors_used == 3);
        CHECK(res.anchors_skipped == 2);
        CHECK_FALSE(res.degenerate);
    }
    SUBCASE("targets carry no gradient") {
        Tensor latents = random_matrix(4, 3, 1.0, true);
        nn::Rng rng(5);
        auto res = losses::loss_latent_supervised(latents, {0, 0, 0, 0}, rng);
        res.loss.backward();
        // Gradient exists (anchors) but is finite and defined; the detached
        // target path contributes nothing beyond the anchor path.
        for (double g : latents.grad()) CHECK(std::isfinite(g));
    }
}

TEST_CASE("loss_latent_augment") {
    SUBCASE("identical rows give zero") {
        Tensor anchors = Tensor::from({3, 2}, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
        CHECK(losses::loss_latent_augment(anchors, anchors.detach()).item() ==
              Approx(0.0).epsilon(1e-13));
    }
    SUBCASE("single anchor gives zero") {
        Tensor a = Tensor::from({1, 4}, {1.0, -2.0, 0.5, 3.0});
        CHECK(losses::loss_latent_augment(a, a.detach()).item() ==
              Approx(0.0).epsilon(1e-14));
    }
    SUBCASE("orthonormal anchors with identity augmentation, frozen value") {
        Tensor anchors = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
        CHECK(losses::loss_latent_augment(anchors, anchors.detach()).item() ==
              Approx(-0.37988549304172248).epsilon(1e-12));
    }
    SUBCASE("shape mismatch is rejected") {
        Tensor a = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
        Tensor b = Tensor::from({3, 2}, {1.0, 0.0, 0.0, 1.0, 1.0, 1.0});
        CHECK_THROWS(losses::loss_latent_augment(a, b));
    }
}

TEST_CASE("critic losses with a fixed half-certain discriminator") {
    // Zero all discriminator parameters: every logit is 0, so D == 0.5.
    nn::Rng init(6);
    nn::DiscriminatorConfig dcfg;
    dcfg.input_dim = 3;
    dcfg.hidden = 4;
    nn::Discriminator disc(dcfg, init);
    for (Tensor p : disc.parameters()) {
        for (double& v : p.mutable_values()) v = 0.0;
    }
    Tensor probs = Tensor::from({2, 3}, {0.1, 0.7, 0.2, 0.3, 0.3, 0.4});
    Tensor prior = Tensor::from({2, 3}, {1, 0, 0, 0, 0, 1});
    CHECK(losses::loss_critic_disc(disc, probs, prior).item() ==
          Approx(2.0 * kLn2).epsilon(1e-13));
    CHECK(losses::loss_critic_model(disc, probs).item() ==
          Approx(std::log(0.5)).epsilon(1e-13));
}

TEST_CASE("critic gradient routing") {
    nn::Rng init(7);
    nn::DiscriminatorConfig dcfg;
    dcfg.input_dim = 2;
    dcfg.hidden = 4;
    nn::Discriminator disc(dcfg, init);
    Tensor probs = Tensor::from({2, 2}, {0.9, 0.1, 0.2, 0.8}, true);
    Tensor prior = Tensor::from({2, 2}, {1, 0, 0, 1});

    SUBCASE("disc loss never reaches the model input") {
        losses::loss_critic_disc(disc, probs, prior).backward();
        CHECK_FALSE(probs.has_grad());
        for (const Tensor& p : disc.parameters()) {
            CHECK(p.has_grad());
            p.zero_grad();
        }
    }
    SUBCASE("model loss reaches the model input") {
        losses::loss_critic_model(disc, probs).backward();
        CHECK(probs.has_grad());
        double norm = 0.0;
        for (double g : probs.grad()) norm += std::abs(g);
        CHECK(norm > 0.0);
    }
}

TEST_CASE("loss_total composition") {
    LossWeights w;
    CHECK(losses::loss_total_value(1.5, 99.0, 99.0, 99.0, w) == Approx(1.5));
    w.lambda_critic = w.lambda_latent = w.lambda_augment = 1.0;
    CHECK(losses::loss_total_value(1.0, 2.0, 3.0, 4.0, w) == Approx(10.0));
    // Paper-style weights.
    w.lambda_critic = 0.001;
    w.lambda_latent = 0.1;
    w.lambda_augment = 0.1;
    CHECK(losses::loss_total_value(0.5, 2.0, 3.0, 4.0, w) ==
          Approx(0.5 + 0.002 + 0.3 + 0.4).epsilon(1e-14));

    Tensor sup = Tensor::scalar(1.0);
    Tensor critic = Tensor::scalar(2.0);
    CHECK(losses::loss_total(sup, &critic, nullptr, nullptr, w).item() ==
          Approx(1.0 + 0.001 * 2.0).epsilon(1e-14));
    // Zero weight skips the provided term entirely.
    w.lambda_critic = 0.0;
    CHECK(losses::loss_total(sup, &critic, nullptr, nullptr, w).item() ==
          Approx(1.0));
    LossWeights bad;
    bad.lambda_critic = -1.0;
    CHECK_THROWS(bad.validate());
}

TEST_CASE("gradients of every loss match finite differences") {
    // rel. error < 1e-5 at 64-bit with perturbation 1e-5 on small batches.
    const Labels labels{0, 2, 1, 0};
    Tensor logits = random_matrix(4, 3, 2.0, true);
    Tensor denom = random_matrix(6, 3, 2.0, true);

    auto check = [&](const std::function<Tensor()>& f, std::vector<Tensor> leaves) {
        for (Tensor& l : leaves) l.zero_grad();
        f().backward();
        auto value = [&f]() { return f().item(); };
        for (Tensor& leaf : leaves) {
            const auto fd = verify::finite_difference(value, leaf, 1e-5);
            CHECK(verify::max_rel_error(leaf.grad(), fd) < 1e-5);
            leaf.zero_grad();
        }
    };

    for (auto kind : {RescaleKind::Softmax, RescaleKind::Sigmoid}) {
        check([&] { return losses::loss_cat_cross(logits, labels, kind); }, {logits});
        check([&] { return losses::loss_cat_twin(logits, labels, denom, kind); },
              {logits, denom});
        check([&] { return losses::loss_bin_cross(logits, labels, kind); }, {logits});
    }
    Tensor scores = random_matrix(5, 5, 3.0, true);
    check([&] { return losses::loss_infonce(scores, InfoNceAxis::OverTargets); },
          {scores});
    check([&] { return losses::loss_infonce(scores, InfoNceAxis::OverSources); },
          {scores});
    // Latent loss: FD must hold the detached targets at their base values,
    // so the numeric oracle runs on an equivalent frozen-target form.
    Tensor latents = random_matrix(6, 4, 1.0, true);
    const Labels lat_lab{0, 0, 1, 1, 2, 2};
    {
        nn::Rng pick(9);
        const auto sel = losses::select_positive_partners(lat_lab, pick);
        Tensor frozen = nn::select_rows(latents, sel.partner).detach();
        auto frozen_form = [&] {
            return losses::loss_infonce(
                losses::cosine_score_matrix(nn::select_rows(latents, sel.kept),
                                            frozen),
                InfoNceAxis::OverTargets);
        };
        nn::Rng fixed(9);
        Tensor real = losses::loss_latent_supervised(latents, lat_lab, fixed).loss;
        CHECK(real.item() == Approx(frozen_form().item()).epsilon(1e-12));
        latents.zero_grad();
        real.backward();
        const auto analytic = latents.grad();
        auto value = [&]() { return frozen_form().item(); };
        const auto fd = verify::finite_difference(value, latents, 1e-5);
        CHECK(verify::max_rel_error(analytic, fd) < 1e-5);
        latents.zero_grad();
    }
    Tensor aug = random_matrix(6, 4, 1.0);
    check([&] { return losses::loss_latent_augment(latents, aug); }, {latents});
}

TEST_CASE("sigmoid collapse and its cures") {
    // Conditional-only sigmoid training drives every output towards 1; the
    // twin denominator or the adversarial critic keeps the non-target
    // outputs down. (Full 2000-step version runs in the acceptance suite.)
    const auto plain =
        verify::collapse_probe(verify::CollapseMode::SigmoidCrossOnly, 2000, 5);
    CHECK(plain.mean_all_outputs > 0.99);

    const auto twin =
        verify::collapse_probe(verify::CollapseMode::TwinDenominator, 2000, 5);
    CHECK(twin.mean_nontarget_outputs < 0.5);

    const auto critic = verify::collapse_probe(verify::CollapseMode::Critic, 2000, 5);
    CHECK(critic.mean_nontarget_outputs < 0.5);
}
