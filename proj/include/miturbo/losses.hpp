#pragma once

#include <vector>

#include "miturbo/densities.hpp"
#include "miturbo/networks.hpp"
#include "miturbo/tensor.hpp"

// The training losses: differentiable scalars over logit / latent batches,
// built on the autodiff ops so gradients flow back into the networks. Values
// agree with the pure log-domain forms in densities.
namespace miturbo::losses {

using densities::RescaleKind;
using nn::Tensor;

// Per-row class indices for an [N, C] logit tensor.
using Labels = std::vector<int>;

struct LossWeights {
    double lambda_critic = 0.0;
    double lambda_latent = 0.0;
    double lambda_augment = 0.0;

    void validate() const;
};

// log p(y_i|x_i) as an [N,1] column.
Tensor log_conditional_rows(const Tensor& logits, const Labels& labels,
                            RescaleKind kind);
// log of the empirical per-class marginal over a batch, as a [1,C] row.
Tensor log_marginal_cols(const Tensor& logits, RescaleKind kind);

// -(1/N) sum_i log p(y_i|x_i).
Tensor loss_cat_cross(const Tensor& logits, const Labels& labels,
                      RescaleKind kind);

// -(1/N) sum_i [log p(y_i|x_i) - log p_marg(y_i)] with the marginal taken
// over `denom_logits`. Pass the same tensor for both to tie numerator and
// denominator to one batch. Can be negative.
Tensor loss_cat_twin(const Tensor& logits, const Labels& labels,
                     const Tensor& denom_logits, RescaleKind kind);

// -(1/N) sum_i sum_c [y_c log s_c + (1-y_c) log(1-s_c)], s = rescaled row.
Tensor loss_bin_cross(const Tensor& logits, const Labels& labels,
                      RescaleKind kind);

// Which way the denominator expectation runs over an [N,N] score matrix
// whose diagonal holds the positive pairs. OverTargets averages each row
// (fixed anchor, candidate targets); OverSources averages each column.
enum class InfoNceAxis { OverTargets, OverSources };

// -(1/N) sum_i log[ e^{s_ii} / ((1/N) sum_j e^{s_..}) ]; always >= -log N.
// `scale` multiplies every score first (an inverse temperature; default 1).
Tensor loss_infonce(const Tensor& scores, InfoNceAxis axis, double scale = 1.0);

// Pairwise cosine similarities: [N,D] x [M,D] -> [N,M].
Tensor cosine_score_matrix(const Tensor& a, const Tensor& b);

struct LatentLossResult {
    Tensor loss;           // scalar; constant 0 when degenerate
    int anchors_used = 0;
    int anchors_skipped = 0;
    bool degenerate = false;  // no class had two members
};

// For each anchor with at least one same-class partner, picks one uniformly
// at random; anchors without partners are dropped from `kept`.
struct PositivePairSelection {
    std::vector<int> kept;
    std::vector<int> partner;  // parallel to kept
};
PositivePairSelection select_positive_partners(const Labels& labels, nn::Rng& rng);

// Supervised alignment: each anchor's positive is another batch row of the
// same class (chosen uniformly via rng, gradient-detached); the other
// anchors' targets act as negatives. Single-member classes are skipped.
LatentLossResult loss_latent_supervised(const Tensor& latents,
                                        const Labels& labels, nn::Rng& rng);

// Self-supervised alignment against augmented views (targets detached by
// the caller).
Tensor loss_latent_augment(const Tensor& anchors, const Tensor& augmented);

// Critic halves. The discriminator loss sees the model's probability rows
// detached, so its gradient reaches only the discriminator; the model loss
// is the log(1 - D(model)) term, minimised by encoder+predictor.
Tensor loss_critic_disc(const nn::Discriminator& disc, const Tensor& probs_model,
                        const Tensor& onehots_prior);
Tensor loss_critic_model(const nn::Discriminator& disc, const Tensor& probs_model);

// sup + lambda_C*critic + lambda_L*latent + lambda_A*augment. Null terms
// (their computation short-circuited upstream) and zero weights are skipped.
Tensor loss_total(const Tensor& sup, const Tensor* critic_model,
                  const Tensor* latent, const Tensor* augment,
                  const LossWeights& w);
double loss_total_value(double sup, double critic_model, double latent,
                        double augment, const LossWeights& w);

}  // namespace miturbo::losses
