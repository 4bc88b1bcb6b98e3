#pragma once

#include <cstdint>
#include <vector>

#include "miturbo/tensor.hpp"

namespace miturbo::nn {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// Decoupled-weight-decay Adam over a fixed parameter list. Gradients are
// read from each parameter tensor; a non-finite gradient aborts the step.
class AdamW {
public:
    AdamW(std::vector<Tensor> params, AdamWConfig cfg);

    // Applies one update; `lr` overrides cfg.lr (e.g. warm-up schedule).
    void step(double lr);
    void step() { step(cfg_.lr); }

    void zero_grad();
    int64_t step_count() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamWConfig cfg_;
    int64_t t_ = 0;
};

// Linear warm-up from base_lr*initial_factor at step 0 to base_lr at step
// `warmup_steps`, constant afterwards.
double warmup_lr(int64_t step, double base_lr, int warmup_steps = 150,
                 double initial_factor = 0.001);

}  // namespace miturbo::nn
