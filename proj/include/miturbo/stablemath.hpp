#pragma once

#include <span>
#include <vector>

// Log-domain kernels shared by every density and loss. All routines work in
// 64-bit floating point and are total on finite inputs: no finite input may
// produce a NaN or infinity.
namespace miturbo::stablemath {

// log(sum_i exp(x_i)), computed with the max-shift so that huge or tiny
// inputs neither overflow nor underflow. Throws std::domain_error on empty
// input or non-finite entries.
double logsumexp(std::span<const double> x);

// out_i = x_i - logsumexp(x). Every output is <= 0 and sum(exp(out)) == 1.
std::vector<double> log_softmax(std::span<const double> x);

// Stable -log(1 + exp(-x)). Below `kLogSigmoidLinearCutoff` the exp term
// dominates to machine precision and the function returns x directly.
double log_sigmoid(double x);

inline constexpr double kLogSigmoidLinearCutoff = -30.0;

// exp of the stable log forms.
std::vector<double> softmax(std::span<const double> x);
double sigmoid(double x);

// log(1 - exp(a)) for a < 0, switching between expm1 and log1p branches.
double log1mexp(double a);

// Plain sum for short inputs, pairwise recursion above 1024 elements to keep
// the accumulated rounding error logarithmic in the length.
double stable_sum(std::span<const double> x);

}  // namespace miturbo::stablemath
