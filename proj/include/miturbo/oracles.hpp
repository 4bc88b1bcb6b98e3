#pragma once

#include <functional>
#include <vector>

// Exact enumeration-based values for mutual information, divergences and the
// variational lower bounds, on small discrete supports. These are ground
// truth for the verification suites, not estimators: supports are capped at
// 64 states per variable.
namespace miturbo::oracles {

inline constexpr int kMaxSupport = 64;

using ProbVec = std::vector<double>;
// Row-major |X| x |Y| tables.
using ProbTable = std::vector<std::vector<double>>;

// Joint distribution p(x, y) over finite supports. Validates on
// construction: non-negative, finite, sums to 1 within 1e-12.
struct DiscreteJoint {
    ProbTable table;

    explicit DiscreteJoint(ProbTable t);

    int nx() const { return static_cast<int>(table.size()); }
    int ny() const { return static_cast<int>(table.front().size()); }

    ProbVec marginal_x() const;
    ProbVec marginal_y() const;
    // p(y|x) rows; a zero-mass x keeps a uniform placeholder row.
    ProbTable conditional_y_given_x() const;
};

// I(X;Y) = sum p(x,y) log[p(x,y) / (p(x)p(y))] in nats, with 0 log 0 := 0.
double exact_mi(const DiscreteJoint& j);

// KL(p || q) in nats. Throws std::domain_error if q_i = 0 while p_i > 0.
double exact_kld(const ProbVec& p, const ProbVec& q);

// Jensen-Shannon divergence in nats; symmetric, in [0, ln 2].
double exact_jsd(const ProbVec& p, const ProbVec& q);

// Variational bound E_{p(x,y)}[log q(y|x) / p(y)] for a parametric
// conditional q(y|x); <= exact_mi, equal iff q matches the true conditional.
double ba_bound(const DiscreteJoint& j, const ProbTable& q_cond);

// Re-expressed bound E_{p(x,y)}[log q(y|x) / q(y)] - KL(p(y) || q(y)) with
// the induced marginal q(y) = sum_x p(x) q(y|x); also <= exact_mi.
double twin_bound(const DiscreteJoint& j, const ProbTable& q_cond);

// Density-ratio discriminator on an enumerable support: maps a state index
// to a value in (0,1).
using Discriminator = std::function<double(int)>;

// The analytically optimal discriminator D*(y) = p(y) / (p(y) + q(y)).
Discriminator optimal_discriminator(const ProbVec& p, const ProbVec& q);

// E_p[log D] - E_p[log(1-D)]. With D = optimal_discriminator(p, q) this
// equals exact_kld(p, q).
double kld_via_discriminator(const ProbVec& p, const Discriminator& d);

// Monte-Carlo form over sample indices drawn from p.
double kld_via_discriminator_samples(const std::vector<int>& p_samples,
                                     const Discriminator& d);

// (1/2) E_p[log D] + (1/2) E_q[log(1-D)] + log 2. With the optimal
// discriminator this equals exact_jsd(p, q).
double jsd_via_discriminator(const ProbVec& p, const ProbVec& q,
                             const Discriminator& d);

}  // namespace miturbo::oracles
