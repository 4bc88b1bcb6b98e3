#pragma once

#include <vector>

#include "miturbo/tensor.hpp"

namespace miturbo::nn {

// Fills a [in, out] weight with U(-b, b), b = sqrt(6 / fan_in).
void init_he_uniform(Tensor& w, int fan_in, Rng& rng);

struct Linear {
    Tensor weight;  // [in, out]
    Tensor bias;    // [1, out], zero-initialised

    Linear() = default;
    Linear(int in, int out, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<Tensor>& params) const;
};

// Scaled dot-product attention over each sample's token block, with learned
// Q/K/V and output projections.
struct AttentionBlock {
    Linear wq, wk, wv, wo;

    AttentionBlock() = default;
    AttentionBlock(int dim, Rng& rng);

    // tokens: [N*T, dim], one block of T rows per sample.
    Tensor forward(const Tensor& tokens, int block_rows) const;
    void collect(std::vector<Tensor>& params) const;
};

// Linear producing two chunks, SiLU on the first, elementwise product,
// closing Linear.
struct SwiGluBlock {
    Linear in;   // dim -> 2*dim
    Linear out;  // dim -> dim

    SwiGluBlock() = default;
    SwiGluBlock(int dim, Rng& rng);

    Tensor forward(const Tensor& x) const;
    void collect(std::vector<Tensor>& params) const;
};

}  // namespace miturbo::nn
