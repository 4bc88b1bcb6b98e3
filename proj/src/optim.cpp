#include "miturbo/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace miturbo::nn {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void AdamW::step(double lr) {
    // Validate every gradient before touching any parameter so a failed
    // step leaves the model untouched.
    for (const Tensor& p : params_) {
        if (!p.has_grad()) {
            throw std::runtime_error("adamw: parameter has no gradient");
        }
        for (double g : p.grad()) {
            if (!std::isfinite(g)) {
                throw std::runtime_error("adamw: non-finite gradient, step aborted");
            }
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        auto& values = params_[pi].mutable_values();
        const auto& grad = params_[pi].grad();
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double g = grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            values[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) +
                               cfg_.weight_decay * values[i]);
        }
    }
}

void AdamW::zero_grad() {
    for (Tensor& p : params_) {
        if (p.has_grad()) p.zero_grad();
    }
}

double warmup_lr(int64_t step, double base_lr, int warmup_steps,
                 double initial_factor) {
    if (step < 0) throw std::invalid_argument("warmup_lr: negative step");
    if (warmup_steps <= 0 || step >= warmup_steps) return base_lr;
    const double progress = static_cast<double>(step) / warmup_steps;
    return base_lr * (initial_factor + (1.0 - initial_factor) * progress);
}

}  // namespace miturbo::nn
