#pragma once

#include <span>
#include <vector>

// Parametric conditional and marginal densities over class labels, exposed
// in log-domain only; callers exponentiate explicitly.
namespace miturbo::densities {

// How raw classifier outputs are rescaled into (0,1): Softmax normalises the
// row to sum to 1, Sigmoid rescales each output independently.
enum class RescaleKind { Softmax, Sigmoid };

// Which partition function the underlying exponential-family density uses:
// scaled-normalised divides by E_{p(y)}[e^s] (see log_partition_scaled),
// globally-normalised by the plain sum over classes, self-normalised
// requires the scores to carry their own normalisation.
enum class NormalisationKind { ScaledNormalised, GloballyNormalised, SelfNormalised };

// Rescale + normalisation choice shared by the losses. Globally-normalised
// densities with one-hot scores reduce to the softmax rescale; relaxing to
// the self-normalised form yields the sigmoid rescale. Scaled-normalised
// densities keep an explicit prior and have no elementwise rescale.
struct DensitySpec {
    NormalisationKind normalisation = NormalisationKind::GloballyNormalised;
    RescaleKind rescale = RescaleKind::Softmax;

    // Throws std::invalid_argument on a pairing that contradicts the
    // correspondence above.
    void validate() const;
};

// The rescale realising a normalisation choice (Globally -> Softmax,
// Self -> Sigmoid); throws for ScaledNormalised, which keeps a prior
// instead of an elementwise rescale.
RescaleKind rescale_for(NormalisationKind kind);

// One-hot label: exactly one of `num_classes` components set.
struct OneHot {
    int class_index = 0;
    int num_classes = 2;

    OneHot(int index, int classes);
    std::vector<double> to_vector() const;
};

// N x C matrix of classifier outputs, row-major, finite.
struct LogitBatch {
    int n = 0;
    int c = 0;
    std::vector<double> values;

    LogitBatch(int n_, int c_, std::vector<double> v);
    std::span<const double> row(int i) const;
};

// log p(y|x) for one logit row. Softmax: log_softmax(logits)[y].
// Sigmoid: log_sigmoid(logits[y]).
double log_conditional(std::span<const double> logits, const OneHot& y,
                       RescaleKind kind);

// log of the product-form conditional: the correct output pushed towards 1,
// every other output towards 0. Always <= 0.
double log_binary_conditional(std::span<const double> logits, const OneHot& y,
                              RescaleKind kind);

// log of the empirical marginal (1/N) sum_j p(y | x_j) over a batch,
// evaluated via logsumexp. Every row of the batch participates.
double log_marginal(const LogitBatch& batch, const OneHot& y, RescaleKind kind);

// log Z for the scaled-normalised density: log sum_y prior_y e^{score_y}.
double log_partition_scaled(std::span<const double> scores,
                            std::span<const double> prior);

// Cosine similarity in [-1, 1]; throws std::domain_error on zero-norm input.
double cosine_score(std::span<const double> a, std::span<const double> b);

}  // namespace miturbo::densities
