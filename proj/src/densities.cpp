#include "miturbo/densities.hpp"

#include <cmath>
#include <stdexcept>

#include "miturbo/stablemath.hpp"

namespace miturbo::densities {

namespace sm = miturbo::stablemath;

RescaleKind rescale_for(NormalisationKind kind) {
    switch (kind) {
        case NormalisationKind::GloballyNormalised:
            return RescaleKind::Softmax;
        case NormalisationKind::SelfNormalised:
            return RescaleKind::Sigmoid;
        case NormalisationKind::ScaledNormalised:
            break;
    }
    throw std::invalid_argument(
        "rescale_for: scaled-normalised densities keep an explicit prior "
        "(log_partition_scaled) instead of an elementwise rescale");
}

void DensitySpec::validate() const {
    if (normalisation == NormalisationKind::ScaledNormalised) {
        throw std::invalid_argument(
            "DensitySpec: scaled-normalised densities have no rescale pairing");
    }
    if (rescale != rescale_for(normalisation)) {
        throw std::invalid_argument(
            "DensitySpec: rescale contradicts the normalisation choice");
    }
}

OneHot::OneHot(int index, int classes) : class_index(index), num_classes(classes) {
    if (classes < 2) throw std::invalid_argument("OneHot: need at least 2 classes");
    if (index < 0 || index >= classes) {
        throw std::out_of_range("OneHot: class index out of range");
    }
}

std::vector<double> OneHot::to_vector() const {
    std::vector<double> v(num_classes, 0.0);
    v[class_index] = 1.0;
    return v;
}

LogitBatch::LogitBatch(int n_, int c_, std::vector<double> v)
    : n(n_), c(c_), values(std::move(v)) {
    if (n < 1 || c < 2) throw std::invalid_argument("LogitBatch: bad dimensions");
    if (values.size() != static_cast<std::size_t>(n) * c) {
        throw std::invalid_argument("LogitBatch: size mismatch");
    }
    for (double x : values) {
        if (!std::isfinite(x)) throw std::invalid_argument("LogitBatch: non-finite entry");
    }
}

std::span<const double> LogitBatch::row(int i) const {
    if (i < 0 || i >= n) throw std::out_of_range("LogitBatch: row out of range");
    return {values.data() + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(c)};
}

namespace {

void check_label(std::span<const double> logits, const OneHot& y) {
    if (static_cast<int>(logits.size()) != y.num_classes) {
        throw std::invalid_argument("label class count does not match logit width");
    }
}

}  // namespace

double log_conditional(std::span<const double> logits, const OneHot& y,
                       RescaleKind kind) {
    check_label(logits, y);
    if (kind == RescaleKind::Softmax) {
        return logits[y.class_index] - sm::logsumexp(logits);
    }
    return sm::log_sigmoid(logits[y.class_index]);
}

double log_binary_conditional(std::span<const double> logits, const OneHot& y,
                              RescaleKind kind) {
    check_label(logits, y);
    double acc = 0.0;
    if (kind == RescaleKind::Sigmoid) {
        for (int c = 0; c < y.num_classes; ++c) {
            // log sigma(l) and log(1 - sigma(l)) = log sigma(-l).
            acc += (c == y.class_index) ? sm::log_sigmoid(logits[c])
                                        : sm::log_sigmoid(-logits[c]);
        }
        return acc;
    }
    const double lse = sm::logsumexp(logits);
    for (int c = 0; c < y.num_classes; ++c) {
        const double log_p = logits[c] - lse;
        acc += (c == y.class_index) ? log_p : sm::log1mexp(log_p);
    }
    return acc;
}

double log_marginal(const LogitBatch& batch, const OneHot& y, RescaleKind kind) {
    if (batch.c != y.num_classes) {
        throw std::invalid_argument("log_marginal: class count mismatch");
    }
    std::vector<double> log_conds(batch.n);
    for (int i = 0; i < batch.n; ++i) {
        log_conds[i] = log_conditional(batch.row(i), y, kind);
    }
    return sm::logsumexp(log_conds) - std::log(static_cast<double>(batch.n));
}

double log_partition_scaled(std::span<const double> scores,
                            std::span<const double> prior) {
    if (scores.size() != prior.size()) {
        throw std::invalid_argument("log_partition_scaled: length mismatch");
    }
    if (scores.empty()) {
        throw std::invalid_argument("log_partition_scaled: empty input");
    }
    double prior_sum = 0.0;
    for (double p : prior) {
        if (!std::isfinite(p) || p < 0.0) {
            throw std::invalid_argument("log_partition_scaled: invalid prior");
        }
        prior_sum += p;
    }
    if (std::abs(prior_sum - 1.0) > 1e-9) {
        throw std::invalid_argument("log_partition_scaled: prior not normalised");
    }
    // log sum_y p(y) e^{s_y} = logsumexp(log p(y) + s_y) over p(y) > 0.
    std::vector<double> shifted;
    shifted.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (prior[i] > 0.0) shifted.push_back(std::log(prior[i]) + scores[i]);
    }
    if (shifted.empty()) {
        throw std::invalid_argument("log_partition_scaled: prior has no mass");
    }
    return sm::logsumexp(shifted);
}

double cosine_score(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("cosine_score: length mismatch");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::domain_error("cosine_score: zero-norm vector");
    }
    double v = dot / (std::sqrt(na) * std::sqrt(nb));
    if (v > 1.0) v = 1.0;
    if (v < -1.0) v = -1.0;
    return v;
}

}  // namespace miturbo::densities
