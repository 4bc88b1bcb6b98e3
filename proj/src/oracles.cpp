#include "miturbo/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace miturbo::oracles {

namespace {

constexpr double kSumTolerance = 1e-12;

void check_prob_vec(const ProbVec& p, const char* what) {
    if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty");
    if (static_cast<int>(p.size()) > kMaxSupport) {
        throw std::invalid_argument(std::string(what) + ": support too large");
    }
    double s = 0.0;
    for (double v : p) {
        if (!std::isfinite(v) || v < 0.0) {
            throw std::invalid_argument(std::string(what) + ": invalid mass");
        }
        s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) {
        throw std::invalid_argument(std::string(what) + ": not normalised");
    }
}

double xlogx_ratio(double p, double q) {
    // p log(p/q) with 0 log 0 := 0.
    if (p == 0.0) return 0.0;
    return p * std::log(p / q);
}

}  // namespace

DiscreteJoint::DiscreteJoint(ProbTable t) : table(std::move(t)) {
    if (table.empty() || table.front().empty()) {
        throw std::invalid_argument("DiscreteJoint: empty table");
    }
    if (nx() > kMaxSupport || static_cast<int>(table.front().size()) > kMaxSupport) {
        throw std::invalid_argument("DiscreteJoint: support too large");
    }
    const std::size_t cols = table.front().size();
    double s = 0.0;
    for (const auto& row : table) {
        if (row.size() != cols) {
            throw std::invalid_argument("DiscreteJoint: ragged table");
        }
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("DiscreteJoint: invalid mass");
            }
            s += v;
        }
    }
    if (std::abs(s - 1.0) > kSumTolerance) {
        throw std::invalid_argument("DiscreteJoint: table does not sum to 1");
    }
}

ProbVec DiscreteJoint::marginal_x() const {
    ProbVec px(nx(), 0.0);
    for (int x = 0; x < nx(); ++x) {
        for (double v : table[x]) px[x] += v;
    }
    return px;
}

ProbVec DiscreteJoint::marginal_y() const {
    ProbVec py(ny(), 0.0);
    for (const auto& row : table) {
        for (int y = 0; y < ny(); ++y) py[y] += row[y];
    }
    return py;
}

ProbTable DiscreteJoint::conditional_y_given_x() const {
    const ProbVec px = marginal_x();
    ProbTable cond(nx(), ProbVec(ny(), 1.0 / ny()));
    for (int x = 0; x < nx(); ++x) {
        if (px[x] == 0.0) continue;
        for (int y = 0; y < ny(); ++y) cond[x][y] = table[x][y] / px[x];
    }
    return cond;
}

double exact_mi(const DiscreteJoint& j) {
    const ProbVec px = j.marginal_x();
    const ProbVec py = j.marginal_y();
    double mi = 0.0;
    for (int x = 0; x < j.nx(); ++x) {
        for (int y = 0; y < j.ny(); ++y) {
            const double pxy = j.table[x][y];
            if (pxy == 0.0) continue;
            mi += pxy * std::log(pxy / (px[x] * py[y]));
        }
    }
    return mi;
}

double exact_kld(const ProbVec& p, const ProbVec& q) {
    check_prob_vec(p, "exact_kld p");
    check_prob_vec(q, "exact_kld q");
    if (p.size() != q.size()) {
        throw std::invalid_argument("exact_kld: support mismatch");
    }
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) {
            throw std::domain_error("exact_kld: p not absolutely continuous w.r.t. q");
        }
        kl += xlogx_ratio(p[i], q[i]);
    }
    return kl;
}

double exact_jsd(const ProbVec& p, const ProbVec& q) {
    check_prob_vec(p, "exact_jsd p");
    check_prob_vec(q, "exact_jsd q");
    if (p.size() != q.size()) {
        throw std::invalid_argument("exact_jsd: support mismatch");
    }
    double jsd = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        jsd += 0.5 * xlogx_ratio(p[i], m) + 0.5 * xlogx_ratio(q[i], m);
    }
    return jsd;
}

namespace {

void check_conditional(const ProbTable& q_cond, int nx, int ny) {
    if (static_cast<int>(q_cond.size()) != nx) {
        throw std::invalid_argument("conditional: row count mismatch");
    }
    for (const auto& row : q_cond) {
        if (static_cast<int>(row.size()) != ny) {
            throw std::invalid_argument("conditional: column count mismatch");
        }
        double s = 0.0;
        for (double v : row) {
            if (!std::isfinite(v) || v < 0.0) {
                throw std::invalid_argument("conditional: invalid entry");
            }
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) {
            throw std::invalid_argument("conditional: row not normalised");
        }
    }
}

}  // namespace

double ba_bound(const DiscreteJoint& j, const ProbTable& q_cond) {
    check_conditional(q_cond, j.nx(), j.ny());
    const ProbVec py = j.marginal_y();
    double bound = 0.0;
    for (int x = 0; x < j.nx(); ++x) {
        for (int y = 0; y < j.ny(); ++y) {
            const double pxy = j.table[x][y];
            if (pxy == 0.0) continue;
            bound += pxy * std::log(q_cond[x][y] / py[y]);
        }
    }
    return bound;
}

double twin_bound(const DiscreteJoint& j, const ProbTable& q_cond) {
    check_conditional(q_cond, j.nx(), j.ny());
    const ProbVec px = j.marginal_x();
    const ProbVec py = j.marginal_y();

    // Induced marginal q(y) = E_{p(x)}[q(y|x)].
    ProbVec qy(j.ny(), 0.0);
    for (int x = 0; x < j.nx(); ++x) {
        for (int y = 0; y < j.ny(); ++y) qy[y] += px[x] * q_cond[x][y];
    }

    double contrastive = 0.0;
    for (int x = 0; x < j.nx(); ++x) {
        for (int y = 0; y < j.ny(); ++y) {
            const double pxy = j.table[x][y];
            if (pxy == 0.0) continue;
            contrastive += pxy * std::log(q_cond[x][y] / qy[y]);
        }
    }

    double kl = 0.0;
    for (int y = 0; y < j.ny(); ++y) {
        if (py[y] == 0.0) continue;
        kl += py[y] * std::log(py[y] / qy[y]);
    }
    return contrastive - kl;
}

Discriminator optimal_discriminator(const ProbVec& p, const ProbVec& q) {
    check_prob_vec(p, "optimal_discriminator p");
    check_prob_vec(q, "optimal_discriminator q");
    if (p.size() != q.size()) {
        throw std::invalid_argument("optimal_discriminator: support mismatch");
    }
    return [p, q](int y) {
        const double denom = p[y] + q[y];
        if (denom == 0.0) return 0.5;
        return p[y] / denom;
    };
}

namespace {

void check_disc_output(double d) {
    if (!(d > 0.0) || !(d < 1.0)) {
        throw std::domain_error("discriminator output outside (0,1)");
    }
}

}  // namespace

double kld_via_discriminator(const ProbVec& p, const Discriminator& d) {
    check_prob_vec(p, "kld_via_discriminator p");
    double kl = 0.0;
    for (std::size_t y = 0; y < p.size(); ++y) {
        if (p[y] == 0.0) continue;
        const double dy = d(static_cast<int>(y));
        check_disc_output(dy);
        kl += p[y] * (std::log(dy) - std::log(1.0 - dy));
    }
    return kl;
}

double kld_via_discriminator_samples(const std::vector<int>& p_samples,
                                     const Discriminator& d) {
    if (p_samples.empty()) {
        throw std::invalid_argument("kld_via_discriminator_samples: empty");
    }
    double acc = 0.0;
    for (int y : p_samples) {
        const double dy = d(y);
        check_disc_output(dy);
        acc += std::log(dy) - std::log(1.0 - dy);
    }
    return acc / static_cast<double>(p_samples.size());
}

double jsd_via_discriminator(const ProbVec& p, const ProbVec& q,
                             const Discriminator& d) {
    check_prob_vec(p, "jsd_via_discriminator p");
    check_prob_vec(q, "jsd_via_discriminator q");
    if (p.size() != q.size()) {
        throw std::invalid_argument("jsd_via_discriminator: support mismatch");
    }
    double acc = std::log(2.0);
    for (std::size_t y = 0; y < p.size(); ++y) {
        // The optimal discriminator hits exactly 0 or 1 on one-sided states;
        // the matching expectation weight is 0 there, so skip them.
        if (p[y] > 0.0) {
            const double dy = d(static_cast<int>(y));
            acc += 0.5 * p[y] * std::log(dy);
        }
        if (q[y] > 0.0) {
            const double dy = d(static_cast<int>(y));
            acc += 0.5 * q[y] * std::log(1.0 - dy);
        }
    }
    return acc;
}

}  // namespace miturbo::oracles
