#include "miturbo/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace miturbo::losses {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check_batch(const Tensor& logits, const Labels& labels) {
    require(logits.shape().size() == 2, "loss: logits must be 2-D");
    require(logits.rows() >= 1 && logits.cols() >= 2, "loss: batch too small");
    require(static_cast<int>(labels.size()) == logits.rows(),
            "loss: label count mismatch");
    for (int y : labels) {
        require(y >= 0 && y < logits.cols(), "loss: label out of range");
    }
}

}  // namespace

void LossWeights::validate() const {
    for (double v : {lambda_critic, lambda_latent, lambda_augment}) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
        }
    }
}

Tensor log_conditional_rows(const Tensor& logits, const Labels& labels,
                            RescaleKind kind) {
    check_batch(logits, labels);
    if (kind == RescaleKind::Softmax) {
        return nn::gather_rows_entry(nn::log_softmax_rows(logits), labels);
    }
    return nn::log_sigmoid(nn::gather_rows_entry(logits, labels));
}

Tensor log_marginal_cols(const Tensor& logits, RescaleKind kind) {
    require(logits.shape().size() == 2, "log_marginal_cols: 2-D tensor required");
    const double log_n = std::log(static_cast<double>(logits.rows()));
    Tensor log_cond = (kind == RescaleKind::Softmax)
                          ? nn::log_softmax_rows(logits)
                          : nn::log_sigmoid(logits);
    return nn::add_scalar(nn::logsumexp_cols(log_cond), -log_n);
}

Tensor loss_cat_cross(const Tensor& logits, const Labels& labels,
                      RescaleKind kind) {
    return nn::neg(nn::mean_all(log_conditional_rows(logits, labels, kind)));
}

Tensor loss_cat_twin(const Tensor& logits, const Labels& labels,
                     const Tensor& denom_logits, RescaleKind kind) {
    check_batch(logits, labels);
    require(denom_logits.shape().size() == 2 &&
                denom_logits.cols() == logits.cols(),
            "loss_cat_twin: denominator width mismatch");
    Tensor numerator = log_conditional_rows(logits, labels, kind);
    Tensor marginal = nn::select_cols(log_marginal_cols(denom_logits, kind), labels);
    return nn::neg(nn::mean_all(nn::sub(numerator, marginal)));
}

Tensor loss_bin_cross(const Tensor& logits, const Labels& labels,
                      RescaleKind kind) {
    check_batch(logits, labels);
    const int n = logits.rows(), c = logits.cols();

    Tensor log_on, log_off;  // log s_c and log(1 - s_c)
    if (kind == RescaleKind::Sigmoid) {
        log_on = nn::log_sigmoid(logits);
        log_off = nn::log_sigmoid(nn::neg(logits));
    } else {
        log_on = nn::log_softmax_rows(logits);
        log_off = nn::log1mexp(log_on);
    }

    std::vector<double> on_mask(static_cast<std::size_t>(n) * c, 0.0);
    std::vector<double> off_mask(static_cast<std::size_t>(n) * c, 1.0);
    for (int i = 0; i < n; ++i) {
        on_mask[static_cast<std::size_t>(i) * c + labels[i]] = 1.0;
        off_mask[static_cast<std::size_t>(i) * c + labels[i]] = 0.0;
    }
    Tensor on = Tensor::from({n, c}, std::move(on_mask));
    Tensor off = Tensor::from({n, c}, std::move(off_mask));

    Tensor terms = nn::add(nn::mul(on, log_on), nn::mul(off, log_off));
    return nn::neg(nn::scale(nn::sum_all(terms), 1.0 / n));
}

Tensor loss_infonce(const Tensor& scores, InfoNceAxis axis, double scale) {
    require(scores.shape().size() == 2 && scores.rows() == scores.cols(),
            "loss_infonce: square score matrix required");
    require(std::isfinite(scale) && scale > 0.0, "loss_infonce: bad scale");
    const int n = scores.rows();
    Tensor scaled = scale == 1.0 ? scores : nn::scale(scores, scale);
    std::vector<int> diag_idx(n);
    for (int i = 0; i < n; ++i) diag_idx[i] = i;
    Tensor positives = nn::gather_rows_entry(scaled, diag_idx);
    Tensor lse = (axis == InfoNceAxis::OverTargets)
                     ? nn::logsumexp_rows(scaled)
                     : nn::reshape(nn::logsumexp_cols(scaled), {n, 1});
    Tensor per_anchor = nn::sub(lse, positives);
    return nn::add_scalar(nn::mean_all(per_anchor), -std::log(static_cast<double>(n)));
}

Tensor cosine_score_matrix(const Tensor& a, const Tensor& b) {
    require(a.shape().size() == 2 && b.shape().size() == 2 && a.cols() == b.cols(),
            "cosine_score_matrix: dimension mismatch");
    return nn::matmul_nt(nn::l2_normalize_rows(a), nn::l2_normalize_rows(b));
}

PositivePairSelection select_positive_partners(const Labels& labels, nn::Rng& rng) {
    const int n = static_cast<int>(labels.size());
    PositivePairSelection sel;
    std::vector<int> candidates;
    for (int i = 0; i < n; ++i) {
        candidates.clear();
        for (int j = 0; j < n; ++j) {
            if (j != i && labels[j] == labels[i]) candidates.push_back(j);
        }
        if (candidates.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        sel.kept.push_back(i);
        sel.partner.push_back(candidates[pick(rng)]);
    }
    return sel;
}

LatentLossResult loss_latent_supervised(const Tensor& latents,
                                        const Labels& labels, nn::Rng& rng) {
    require(latents.shape().size() == 2, "loss_latent_supervised: 2-D latents");
    const int n = latents.rows();
    require(static_cast<int>(labels.size()) == n,
            "loss_latent_supervised: label count mismatch");

    const PositivePairSelection sel = select_positive_partners(labels, rng);

    LatentLossResult res;
    res.anchors_used = static_cast<int>(sel.kept.size());
    res.anchors_skipped = n - res.anchors_used;
    if (sel.kept.empty()) {
        res.loss = Tensor::scalar(0.0);
        res.degenerate = true;
        return res;
    }

    Tensor anchors = nn::select_rows(latents, sel.kept);
    Tensor targets = nn::select_rows(latents, sel.partner).detach();
    res.loss = loss_infonce(cosine_score_matrix(anchors, targets),
                            InfoNceAxis::OverTargets);
    return res;
}

Tensor loss_latent_augment(const Tensor& anchors, const Tensor& augmented) {
    require(anchors.shape() == augmented.shape(),
            "loss_latent_augment: shape mismatch");
    return loss_infonce(cosine_score_matrix(anchors, augmented),
                        InfoNceAxis::OverTargets);
}

Tensor loss_critic_disc(const nn::Discriminator& disc, const Tensor& probs_model,
                        const Tensor& onehots_prior) {
    // Detach defensively: this half-step may only move the discriminator.
    Tensor d_prior = disc.forward(onehots_prior.detach());
    Tensor d_model = disc.forward(probs_model.detach());
    Tensor term_prior = nn::neg(nn::mean_all(nn::log_sigmoid(d_prior)));
    Tensor term_model = nn::neg(nn::mean_all(nn::log_sigmoid(nn::neg(d_model))));
    return nn::add(term_prior, term_model);
}

Tensor loss_critic_model(const nn::Discriminator& disc, const Tensor& probs_model) {
    Tensor d_model = disc.forward(probs_model);
    return nn::mean_all(nn::log_sigmoid(nn::neg(d_model)));
}

Tensor loss_total(const Tensor& sup, const Tensor* critic_model,
                  const Tensor* latent, const Tensor* augment,
                  const LossWeights& w) {
    w.validate();
    Tensor total = sup;
    if (critic_model && w.lambda_critic != 0.0) {
        total = nn::add(total, nn::scale(*critic_model, w.lambda_critic));
    }
    if (latent && w.lambda_latent != 0.0) {
        total = nn::add(total, nn::scale(*latent, w.lambda_latent));
    }
    if (augment && w.lambda_augment != 0.0) {
        total = nn::add(total, nn::scale(*augment, w.lambda_augment));
    }
    return total;
}

double loss_total_value(double sup, double critic_model, double latent,
                        double augment, const LossWeights& w) {
    w.validate();
    return sup + w.lambda_critic * critic_model + w.lambda_latent * latent +
           w.lambda_augment * augment;
}

}  // namespace miturbo::losses
