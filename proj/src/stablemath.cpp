#include "miturbo/stablemath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace miturbo::stablemath {

namespace {

void require_finite(std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw std::domain_error("stablemath: non-finite input");
        }
    }
}

double pairwise_sum(const double* p, std::size_t n) {
    if (n <= 1024) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += p[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(p, half) + pairwise_sum(p + half, n - half);
}

}  // namespace

double stable_sum(std::span<const double> x) {
    return pairwise_sum(x.data(), x.size());
}

double logsumexp(std::span<const double> x) {
    if (x.empty()) {
        throw std::domain_error("logsumexp: empty input");
    }
    require_finite(x);
    const double m = *std::max_element(x.begin(), x.end());
    std::vector<double> shifted(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = std::exp(x[i] - m);
    return m + std::log(stable_sum(shifted));
}

std::vector<double> log_softmax(std::span<const double> x) {
    const double lse = logsumexp(x);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
    return out;
}

double log_sigmoid(double x) {
    if (!std::isfinite(x)) {
        throw std::domain_error("log_sigmoid: non-finite input");
    }
    if (x < kLogSigmoidLinearCutoff) {
        return x;
    }
    return -std::log1p(std::exp(-x));
}

std::vector<double> softmax(std::span<const double> x) {
    if (x.empty()) {
        throw std::domain_error("softmax: empty input");
    }
    require_finite(x);
    const double m = *std::max_element(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] - m);
    const double z = stable_sum(out);
    for (double& v : out) v /= z;
    return out;
}

double sigmoid(double x) {
    if (!std::isfinite(x)) {
        throw std::domain_error("sigmoid: non-finite input");
    }
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log1mexp(double a) {
    if (!(a < 0.0)) {
        throw std::domain_error("log1mexp: argument must be negative");
    }
    // Cutoff at -ln 2 picks the branch with the smaller relative error.
    constexpr double kLn2 = 0.6931471805599453;
    if (a < -kLn2) {
        return std::log1p(-std::exp(a));
    }
    return std::log(-std::expm1(a));
}

}  // namespace miturbo::stablemath
