#include "miturbo/verify.hpp"

#include <algorithm>
#include <cmath>

#include "miturbo/densities.hpp"
#include "miturbo/layers.hpp"
#include "miturbo/losses.hpp"
#include "miturbo/networks.hpp"
#include "miturbo/optim.hpp"
#include "miturbo/oracles.hpp"
#include "miturbo/stablemath.hpp"

namespace miturbo::verify {

namespace sm = miturbo::stablemath;
using densities::RescaleKind;
using nn::Tensor;

std::vector<double> finite_difference(const std::function<double()>& f,
                                      nn::Tensor leaf, double eps) {
    auto& values = leaf.mutable_values();
    std::vector<double> grad(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + eps;
        const double hi = f();
        values[i] = saved - eps;
        const double lo = f();
        values[i] = saved;
        grad[i] = (hi - lo) / (2.0 * eps);
    }
    return grad;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// ---- stability ----

std::vector<PropertyResult> stability_suite() {
    std::vector<PropertyResult> out;

    {
        // Finite outputs at |x| up to 1e6.
        int bad = 0;
        auto ok = [&](double v) { if (!std::isfinite(v)) ++bad; };
        ok(sm::logsumexp(std::vector<double>{1e6, 0.0, -1e6}));
        ok(sm::logsumexp(std::vector<double>{1000.0, 1000.0}));
        for (double v : sm::log_softmax(std::vector<double>{1e6, 0.0, -1e6})) ok(v);
        for (double v : sm::log_softmax(std::vector<double>{1000.0, 0.0})) ok(v);
        ok(sm::log_sigmoid(1e6));
        ok(sm::log_sigmoid(-1e6));
        nn::Rng rng(31);
        std::uniform_real_distribution<double> big(-1e6, 1e6);
        for (int t = 0; t < 200; ++t) {
            std::vector<double> x(1 + t % 8);
            for (double& v : x) v = big(rng);
            ok(sm::logsumexp(x));
            for (double v : sm::log_softmax(x)) ok(v);
            ok(sm::log_sigmoid(x[0]));
        }
        out.push_back({"stability/finite-at-1e6", static_cast<double>(bad), 0.0,
                       bad == 0, "non-finite outputs over extreme-input sweep"});
    }

    {
        // logsumexp(x + c) == logsumexp(x) + c; same for log_softmax rows.
        nn::Rng rng(32);
        std::uniform_real_distribution<double> val(-100.0, 100.0);
        double worst = 0.0;
        const double shifts[] = {1.0, -1.0, 100.0, -100.0, 1e5, -1e5};
        for (int t = 0; t < 300; ++t) {
            std::vector<double> x(2 + t % 6);
            for (double& v : x) v = val(rng);
            const double c = shifts[t % 6];
            std::vector<double> xs(x);
            for (double& v : xs) v += c;
            worst = std::max(worst,
                             std::abs(sm::logsumexp(xs) - (sm::logsumexp(x) + c)));
            const auto a = sm::log_softmax(x);
            const auto b = sm::log_softmax(xs);
            for (std::size_t i = 0; i < a.size(); ++i) {
                worst = std::max(worst, std::abs(a[i] - b[i]));
            }
        }
        out.push_back({"stability/shift-invariance", worst, 1e-10, worst < 1e-10,
                       "max |log_softmax(x+c) - log_softmax(x)| over random x, c"});
    }

    {
        // sum(exp(log_softmax)) == 1 within 1e-12 for inputs up to 700.
        nn::Rng rng(33);
        std::uniform_real_distribution<double> val(-700.0, 700.0);
        double worst = 0.0;
        for (int t = 0; t < 300; ++t) {
            std::vector<double> x(2 + t % 10);
            for (double& v : x) v = val(rng);
            double s = 0.0;
            for (double v : sm::log_softmax(x)) s += std::exp(v);
            worst = std::max(worst, std::abs(s - 1.0));
            double s2 = 0.0;
            for (double v : sm::softmax(x)) s2 += v;
            worst = std::max(worst, std::abs(s2 - 1.0));
        }
        out.push_back({"stability/normalisation", worst, 1e-12, worst <= 1e-12,
                       "max |sum exp(log_softmax) - 1|"});
    }

    {
        // Strictly increasing log_sigmoid on a dense grid. Doubles resolve
        // the increments up to x ~ 745 where exp(-x) underflows, so strict
        // monotonicity is asserted there and non-decrease beyond.
        double min_diff = 1e300;
        double prev = sm::log_sigmoid(-1000.0);
        for (double x = -999.5; x <= 700.0; x += 0.5) {
            const double cur = sm::log_sigmoid(x);
            min_diff = std::min(min_diff, cur - prev);
            prev = cur;
        }
        bool non_decreasing = sm::log_sigmoid(1e6) >= prev;
        out.push_back({"stability/log-sigmoid-monotone", min_diff, 0.0,
                       min_diff > 0.0 && non_decreasing,
                       "min forward difference on grid [-1000, 700]"});
    }

    return out;
}

// ---- bounds ----

namespace {

oracles::ProbVec random_prob_vec(int n, nn::Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    oracles::ProbVec p(n);
    double s = 0.0;
    for (double& v : p) {
        v = -std::log(std::max(unit(rng), 1e-300));
        s += v;
    }
    for (double& v : p) v /= s;
    return p;
}

oracles::ProbTable random_joint_table(int nx, int ny, nn::Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    oracles::ProbTable t(nx, oracles::ProbVec(ny));
    double s = 0.0;
    for (auto& row : t) {
        for (double& v : row) {
            v = -std::log(std::max(unit(rng), 1e-300));
            s += v;
        }
    }
    for (auto& row : t) {
        for (double& v : row) v /= s;
    }
    return t;
}

oracles::ProbTable random_conditional(int nx, int ny, nn::Rng& rng) {
    oracles::ProbTable t(nx);
    for (auto& row : t) row = random_prob_vec(ny, rng);
    return t;
}

}  // namespace

std::vector<PropertyResult> bounds_suite(int trials, uint64_t seed) {
    std::vector<PropertyResult> out;
    nn::Rng rng(seed);
    std::uniform_int_distribution<int> size(2, 8);

    {
        double worst_slack = 1e300;  // min over trials of (mi - bound)
        for (int t = 0; t < trials; ++t) {
            const int nx = size(rng), ny = size(rng);
            oracles::DiscreteJoint j(random_joint_table(nx, ny, rng));
            const auto q = random_conditional(nx, ny, rng);
            const double mi = oracles::exact_mi(j);
            worst_slack = std::min(worst_slack, mi - oracles::ba_bound(j, q));
            worst_slack = std::min(worst_slack, mi - oracles::twin_bound(j, q));
        }
        out.push_back({"bounds/lower-bound-slack", worst_slack, -1e-10,
                       worst_slack >= -1e-10,
                       "min (exact_mi - bound) over random joints and conditionals"});
    }

    {
        double worst = 0.0;
        for (int t = 0; t < std::max(1, trials / 5); ++t) {
            const int nx = size(rng), ny = size(rng);
            oracles::DiscreteJoint j(random_joint_table(nx, ny, rng));
            const auto q = j.conditional_y_given_x();
            const double mi = oracles::exact_mi(j);
            worst = std::max(worst, std::abs(mi - oracles::ba_bound(j, q)));
            worst = std::max(worst, std::abs(mi - oracles::twin_bound(j, q)));
        }
        out.push_back({"bounds/equality-at-true-conditional", worst, 1e-12,
                       worst <= 1e-12, "max |bound - exact_mi| at q = p(y|x)"});
    }

    {
        double worst = 0.0;
        for (int t = 0; t < std::max(1, trials / 5); ++t) {
            const int n = size(rng);
            const auto p = random_prob_vec(n, rng);
            const auto q = random_prob_vec(n, rng);
            const auto d = oracles::optimal_discriminator(p, q);
            worst = std::max(worst, std::abs(oracles::jsd_via_discriminator(p, q, d) -
                                             oracles::exact_jsd(p, q)));
            worst = std::max(worst, std::abs(oracles::kld_via_discriminator(p, d) -
                                             oracles::exact_kld(p, q)));
        }
        // Disjoint supports: JSD hits its ln 2 maximum.
        const oracles::ProbVec p0{0.5, 0.5, 0.0, 0.0}, q0{0.0, 0.0, 0.25, 0.75};
        worst = std::max(
            worst, std::abs(oracles::jsd_via_discriminator(
                                p0, q0, oracles::optimal_discriminator(p0, q0)) -
                            std::log(2.0)));
        // Bernoulli reference: KL((0.9,0.1) || (0.5,0.5)).
        const oracles::ProbVec pb{0.9, 0.1}, qb{0.5, 0.5};
        const double kld_ref = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
        worst = std::max(
            worst, std::abs(oracles::kld_via_discriminator(
                                pb, oracles::optimal_discriminator(pb, qb)) -
                            kld_ref));
        out.push_back({"bounds/divergence-via-discriminator", worst, 1e-12,
                       worst <= 1e-12,
                       "max |discriminator-form divergence - exact| with optimal D"});
    }

    return out;
}

// ---- InfoNCE floor ----

std::vector<PropertyResult> infonce_floor_suite(int trials, uint64_t seed) {
    nn::Rng rng(seed);
    std::uniform_int_distribution<int> size(1, 16);
    std::uniform_real_distribution<double> score(-30.0, 30.0);
    double min_margin = 1e300;  // loss + log N
    for (int t = 0; t < trials; ++t) {
        const int n = size(rng);
        std::vector<double> s(static_cast<std::size_t>(n) * n);
        for (double& v : s) v = score(rng);
        Tensor scores = Tensor::from({n, n}, std::move(s));
        for (auto axis : {losses::InfoNceAxis::OverTargets,
                          losses::InfoNceAxis::OverSources}) {
            const double loss = losses::loss_infonce(scores, axis).item();
            min_margin = std::min(min_margin, loss + std::log(static_cast<double>(n)));
        }
    }
    return {{"infonce/floor", min_margin, -1e-12, min_margin >= -1e-12,
             "min (loss + log N) over random score matrices, both axes"}};
}

// ---- gradient checks ----

namespace {

Tensor random_tensor(nn::Shape shape, nn::Rng& rng, double scale = 1.0,
                     bool requires_grad = true) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::uniform_real_distribution<double> dist(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) {
        // Keep clear of the relu/leaky kinks at 0.
        do { x = dist(rng); } while (std::abs(x) < 0.05 * scale);
    }
    return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

struct GradCheck {
    std::vector<PropertyResult>& out;
    double worst = 0.0;
    std::string worst_name = "none";

    // forward() must rebuild the graph and return the scalar loss tensor.
    void check(const std::string& name, const std::function<Tensor()>& forward,
               std::vector<Tensor> leaves, double eps = 1e-5) {
        check_pair(name, forward, forward, leaves, eps);
    }

    // Analytic gradient from `forward`, finite differences on `fd_forward`.
    // The two must coincide in value at the base point; they differ only
    // when part of the forward (detached targets) must stay frozen under
    // perturbation.
    void check_pair(const std::string& name, const std::function<Tensor()>& forward,
                    const std::function<Tensor()>& fd_forward,
                    std::vector<Tensor> leaves, double eps = 1e-5) {
        for (Tensor& l : leaves) l.zero_grad();
        Tensor loss = forward();
        loss.backward();
        double err = std::abs(loss.item() - fd_forward().item());
        auto value_fn = [&fd_forward]() { return fd_forward().item(); };
        for (Tensor& leaf : leaves) {
            const auto numeric = finite_difference(value_fn, leaf, eps);
            err = std::max(err, max_rel_error(leaf.grad(), numeric));
            leaf.zero_grad();
        }
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
        out.push_back({"gradcheck/" + name, err, 1e-4, err < 1e-4, ""});
    }
};

}  // namespace

std::vector<PropertyResult> gradcheck_suite(uint64_t seed) {
    std::vector<PropertyResult> results;
    GradCheck gc{results};
    nn::Rng rng(seed);

    // A fixed random linear functional turns any output into a scalar so
    // that gradient errors cannot cancel in a plain mean.
    auto reduce = [&rng](const Tensor& t) {
        nn::Rng local(1234);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        std::vector<double> w(t.size());
        for (double& v : w) v = dist(local);
        return nn::sum_all(nn::mul(t, Tensor::from(t.shape(), std::move(w))));
    };

    // -- primitives --
    {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
        gc.check("matmul", [&] { return reduce(nn::matmul(a, b)); }, {a, b});
    }
    {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({5, 4}, rng);
        gc.check("matmul_nt", [&] { return reduce(nn::matmul_nt(a, b)); }, {a, b});
    }
    {
        Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
        gc.check("add-mul", [&] { return reduce(nn::mul(nn::add(a, b), a)); }, {a, b});
    }
    {
        Tensor a = random_tensor({4, 3}, rng), b = random_tensor({1, 3}, rng);
        gc.check("add_rowvec", [&] { return reduce(nn::add_rowvec(a, b)); }, {a, b});
    }
    {
        Tensor a = random_tensor({3, 5}, rng);
        gc.check("transpose-slice",
                 [&] { return reduce(nn::slice_cols(nn::transpose(a), 1, 3)); }, {a});
    }
    {
        Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 4}, rng);
        gc.check("concat_cols", [&] { return reduce(nn::concat_cols(a, b)); }, {a, b});
    }
    {
        Tensor a = random_tensor({4, 3}, rng);
        gc.check("select_rows",
                 [&] { return reduce(nn::select_rows(a, {2, 0, 2, 1, 3})); }, {a});
    }
    {
        Tensor a = random_tensor({3, 4}, rng);
        gc.check("relu", [&] { return reduce(nn::relu(a)); }, {a});
        gc.check("leaky_relu", [&] { return reduce(nn::leaky_relu(a, 0.01)); }, {a});
        gc.check("silu", [&] { return reduce(nn::silu(a)); }, {a});
        gc.check("sigmoid", [&] { return reduce(nn::sigmoid(a)); }, {a});
        gc.check("log_sigmoid", [&] { return reduce(nn::log_sigmoid(a)); }, {a});
        gc.check("exp", [&] { return reduce(nn::exp(nn::scale(a, 0.5))); }, {a});
    }
    {
        Tensor a = random_tensor({3, 4}, rng, 2.0);
        gc.check("softmax_rows", [&] { return reduce(nn::softmax_rows(a)); }, {a});
        gc.check("log_softmax_rows",
                 [&] { return reduce(nn::log_softmax_rows(a)); }, {a});
        gc.check("logsumexp_rows", [&] { return reduce(nn::logsumexp_rows(a)); }, {a});
        gc.check("logsumexp_cols", [&] { return reduce(nn::logsumexp_cols(a)); }, {a});
        gc.check("log1mexp",
                 [&] {
                     return reduce(nn::log1mexp(nn::log_softmax_rows(a)));
                 },
                 {a});
    }
    {
        Tensor a = random_tensor({6, 3}, rng);
        gc.check("mean_pool_blocks",
                 [&] { return reduce(nn::mean_pool_blocks(a, 3)); }, {a});
        gc.check("l2_normalize_rows",
                 [&] { return reduce(nn::l2_normalize_rows(a)); }, {a});
        gc.check("gather_rows_entry",
                 [&] { return reduce(nn::gather_rows_entry(a, {0, 2, 1, 0, 2, 1})); },
                 {a});
    }
    {
        Tensor a = random_tensor({4, 5}, rng);
        gc.check("dropout",
                 [&] {
                     nn::Rng fixed(7);  // identical mask on every evaluation
                     return reduce(nn::dropout(a, 0.4, fixed, true));
                 },
                 {a});
    }
    {
        Tensor q = random_tensor({6, 4}, rng), k = random_tensor({6, 4}, rng),
               v = random_tensor({6, 4}, rng);
        gc.check("blockwise_attention",
                 [&] { return reduce(nn::blockwise_attention(q, k, v, 3)); },
                 {q, k, v});
    }
    {
        nn::Rng init(seed + 1);
        nn::SwiGluBlock block(4, init);
        Tensor x = random_tensor({5, 4}, rng);
        std::vector<Tensor> leaves{x};
        block.collect(leaves);
        gc.check("swiglu_block", [&] { return reduce(block.forward(x)); }, leaves);
    }
    {
        nn::Rng init(seed + 2);
        nn::AttentionBlock block(3, init);
        Tensor x = random_tensor({8, 3}, rng);
        std::vector<Tensor> leaves{x};
        block.collect(leaves);
        gc.check("attention_block", [&] { return reduce(block.forward(x, 4)); },
                 leaves);
    }

    // -- losses over logits --
    const losses::Labels labels{0, 2, 1, 0};
    Tensor logits = random_tensor({4, 3}, rng, 2.0);
    Tensor denom = random_tensor({5, 3}, rng, 2.0);
    for (auto kind : {RescaleKind::Softmax, RescaleKind::Sigmoid}) {
        const std::string tag = kind == RescaleKind::Softmax ? "softmax" : "sigmoid";
        gc.check("loss_cat_cross/" + tag,
                 [&] { return losses::loss_cat_cross(logits, labels, kind); },
                 {logits});
        gc.check("loss_cat_twin/" + tag,
                 [&] { return losses::loss_cat_twin(logits, labels, denom, kind); },
                 {logits, denom});
        gc.check("loss_cat_twin-self/" + tag,
                 [&] { return losses::loss_cat_twin(logits, labels, logits, kind); },
                 {logits});
        gc.check("loss_bin_cross/" + tag,
                 [&] { return losses::loss_bin_cross(logits, labels, kind); },
                 {logits});
    }
    {
        Tensor scores = random_tensor({5, 5}, rng, 3.0);
        gc.check("loss_infonce/targets",
                 [&] {
                     return losses::loss_infonce(scores,
                                                 losses::InfoNceAxis::OverTargets);
                 },
                 {scores});
        gc.check("loss_infonce/sources",
                 [&] {
                     return losses::loss_infonce(scores,
                                                 losses::InfoNceAxis::OverSources);
                 },
                 {scores});
    }
    {
        Tensor latents = random_tensor({6, 7}, rng);
        const losses::Labels lab{0, 0, 1, 1, 2, 2};
        // The loss detaches its targets, so the FD oracle must hold them at
        // their base-point values; perturbing the shared latents would
        // otherwise move the targets too and measure a different function.
        nn::Rng pick(11);
        const auto sel = losses::select_positive_partners(lab, pick);
        Tensor frozen_targets = nn::select_rows(latents, sel.partner).detach();
        gc.check_pair(
            "loss_latent_supervised",
            [&] {
                nn::Rng fixed(11);  // identical positive picks per call
                return losses::loss_latent_supervised(latents, lab, fixed).loss;
            },
            [&] {
                return losses::loss_infonce(
                    losses::cosine_score_matrix(
                        nn::select_rows(latents, sel.kept), frozen_targets),
                    losses::InfoNceAxis::OverTargets);
            },
            {latents});
        Tensor aug = random_tensor({6, 7}, rng, 1.0, false);
        gc.check("loss_latent_augment",
                 [&] { return losses::loss_latent_augment(latents, aug); }, {latents});
    }
    {
        nn::Rng init(seed + 3);
        nn::DiscriminatorConfig dcfg;
        dcfg.input_dim = 3;
        dcfg.hidden = 6;
        nn::Discriminator disc(dcfg, init);
        Tensor probs = Tensor::from({4, 3}, {0.2, 0.5, 0.3, 0.8, 0.1, 0.1,
                                             0.4, 0.4, 0.2, 0.1, 0.6, 0.3},
                                    true);
        gc.check("loss_critic_model",
                 [&] { return losses::loss_critic_model(disc, probs); }, {probs});
        Tensor prior = Tensor::from({4, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0});
        std::vector<Tensor> disc_params = disc.parameters();
        gc.check("loss_critic_disc",
                 [&] { return losses::loss_critic_disc(disc, probs, prior); },
                 disc_params);
    }

    // -- composed encoder -> predictor -> each loss --
    {
        nn::Rng init(seed + 4);
        nn::EncoderConfig ecfg;
        ecfg.input_dim = 3;
        ecfg.feature_dim = 4;
        ecfg.n_patch_tokens = 2;
        ecfg.token_dim = 3;
        ecfg.projector_hidden = 5;
        ecfg.dropout_p = 0.3;
        nn::PredictorConfig pcfg;
        pcfg.latent_dim = 5;
        pcfg.hidden = 4;
        pcfg.n_classes = 3;
        nn::Encoder encoder(ecfg, init);
        nn::Predictor predictor(pcfg, init);
        Tensor x = random_tensor({4, 3}, rng, 1.0, false);
        const losses::Labels lab{0, 1, 2, 0};
        std::vector<Tensor> leaves = encoder.parameters();
        for (const Tensor& p : predictor.parameters()) leaves.push_back(p);

        auto encode = [&](bool train) {
            nn::Rng fixed(21);
            return encoder.forward(x, fixed, train);
        };
        gc.check("encoder-predictor/cat-cross",
                 [&] {
                     return losses::loss_cat_cross(predictor.forward(encode(true)),
                                                   lab, RescaleKind::Softmax);
                 },
                 leaves);
        gc.check("encoder-predictor/cat-twin",
                 [&] {
                     Tensor l = predictor.forward(encode(true));
                     return losses::loss_cat_twin(l, lab, l, RescaleKind::Sigmoid);
                 },
                 leaves);
        gc.check("encoder-predictor/bin-cross",
                 [&] {
                     return losses::loss_bin_cross(predictor.forward(encode(true)),
                                                   lab, RescaleKind::Sigmoid);
                 },
                 leaves);
        {
            const losses::Labels lat_lab{0, 0, 1, 1};
            nn::Rng pick(22);
            const auto sel = losses::select_positive_partners(lat_lab, pick);
            Tensor frozen = nn::select_rows(encode(true), sel.partner).detach();
            gc.check_pair(
                "encoder-predictor/latent",
                [&] {
                    nn::Rng fixed(22);
                    return losses::loss_latent_supervised(encode(true), lat_lab,
                                                          fixed)
                        .loss;
                },
                [&] {
                    return losses::loss_infonce(
                        losses::cosine_score_matrix(
                            nn::select_rows(encode(true), sel.kept), frozen),
                        losses::InfoNceAxis::OverTargets);
                },
                leaves);
        }
        nn::Rng init2(seed + 5);
        nn::DiscriminatorConfig dcfg;
        dcfg.input_dim = 3;
        dcfg.hidden = 5;
        nn::Discriminator disc(dcfg, init2);
        gc.check("encoder-predictor/critic-model",
                 [&] {
                     Tensor probs =
                         nn::softmax_rows(predictor.forward(encode(true)));
                     return losses::loss_critic_model(disc, probs);
                 },
                 leaves);
    }

    PropertyResult summary;
    summary.name = "gradcheck/max-over-all";
    summary.margin = gc.worst;
    summary.threshold = 1e-4;
    summary.pass = gc.worst < 1e-4;
    summary.detail = "worst case: " + gc.worst_name;
    results.push_back(summary);
    return results;
}

// ---- sigmoid collapse probe ----

CollapseResult collapse_probe(CollapseMode mode, int steps, uint64_t seed) {
    constexpr int kN = 64, kDim = 8, kClasses = 4;
    nn::Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 0.15);

    // Class-clustered inputs (a learnable signal in the first kClasses
    // dimensions) plus one always-on feature. The shared feature is the
    // collapse channel: conditional-only training raises every class output
    // through it at once. With label-independent inputs the outputs could
    // not be separated at all and neither cure could act.
    std::vector<double> xv(static_cast<std::size_t>(kN) * kDim);
    losses::Labels labels(kN);
    for (int i = 0; i < kN; ++i) {
        labels[i] = i % kClasses;
        for (int k = 0; k < kDim; ++k) {
            xv[static_cast<std::size_t>(i) * kDim + k] = noise(rng);
        }
        xv[static_cast<std::size_t>(i) * kDim + labels[i]] += 0.4;
        xv[static_cast<std::size_t>(i) * kDim + kClasses] += 3.0;
    }
    Tensor x = Tensor::from({kN, kDim}, std::move(xv));
    Tensor w = Tensor::zeros({kDim, kClasses}, true);
    Tensor b = Tensor::zeros({1, kClasses}, true);

    // Training mirrors the real protocol: AdamW under the 150-step linear
    // warm-up. The critic discriminator runs with a strong weight decay so
    // its confidence stays capped and the minimax model term keeps a live
    // gradient; a saturated critic would stop acting entirely.
    constexpr double kModelLr = 0.02;
    constexpr double kDiscLr = 0.05;
    constexpr double kDiscWeightDecay = 1.5;
    constexpr double kCriticWeight = 10.0;

    nn::AdamWConfig model_opt_cfg;
    model_opt_cfg.lr = kModelLr;
    nn::AdamW model_opt({w, b}, model_opt_cfg);

    nn::Rng disc_init(seed ^ 0x5bd1e995u);
    nn::DiscriminatorConfig dcfg;
    dcfg.input_dim = kClasses;
    dcfg.hidden = 32;
    nn::Discriminator disc(dcfg, disc_init);
    nn::AdamWConfig disc_opt_cfg;
    disc_opt_cfg.lr = kDiscLr;
    disc_opt_cfg.weight_decay = kDiscWeightDecay;
    nn::AdamW disc_opt(disc.parameters(), disc_opt_cfg);

    auto logits_of = [&]() { return nn::add_rowvec(nn::matmul(x, w), b); };

    for (int s2 = 0; s2 < steps; ++s2) {
        if (mode == CollapseMode::Critic) {
            Tensor probs = nn::sigmoid(logits_of());
            std::vector<double> prior(static_cast<std::size_t>(kN) * kClasses, 0.0);
            std::uniform_int_distribution<int> cls(0, kClasses - 1);
            for (int i = 0; i < kN; ++i) {
                prior[static_cast<std::size_t>(i) * kClasses + cls(rng)] = 1.0;
            }
            Tensor disc_loss = losses::loss_critic_disc(
                disc, probs, Tensor::from({kN, kClasses}, std::move(prior)));
            disc_loss.backward();
            disc_opt.step(nn::warmup_lr(s2, kDiscLr));
            disc_opt.zero_grad();
        }

        Tensor logits = logits_of();
        Tensor loss;
        switch (mode) {
            case CollapseMode::SigmoidCrossOnly:
                loss = losses::loss_cat_cross(logits, labels, RescaleKind::Sigmoid);
                break;
            case CollapseMode::TwinDenominator:
                loss = losses::loss_cat_twin(logits, labels, logits,
                                             RescaleKind::Sigmoid);
                break;
            case CollapseMode::Critic: {
                Tensor sup =
                    losses::loss_cat_cross(logits, labels, RescaleKind::Sigmoid);
                Tensor critic =
                    losses::loss_critic_model(disc, nn::sigmoid(logits));
                loss = nn::add(sup, nn::scale(critic, kCriticWeight));
                break;
            }
        }
        loss.backward();
        model_opt.step(nn::warmup_lr(s2, kModelLr));
        model_opt.zero_grad();
        for (const Tensor& p : disc.parameters()) p.zero_grad();
    }

    CollapseResult res;
    res.steps = steps;
    const auto& lv = logits_of().values();
    double sum_all = 0.0, sum_nt = 0.0;
    int count_nt = 0;
    for (int i = 0; i < kN; ++i) {
        for (int c = 0; c < kClasses; ++c) {
            const double s = sm::sigmoid(lv[static_cast<std::size_t>(i) * kClasses + c]);
            sum_all += s;
            if (c != labels[i]) {
                sum_nt += s;
                ++count_nt;
            }
        }
    }
    res.mean_all_outputs = sum_all / (kN * kClasses);
    res.mean_nontarget_outputs = sum_nt / count_nt;
    return res;
}

}  // namespace miturbo::verify
