#include "miturbo/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace miturbo::nn {

void init_he_uniform(Tensor& w, int fan_in, Rng& rng) {
    if (fan_in <= 0) throw std::invalid_argument("init_he_uniform: bad fan_in");
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.mutable_values()) v = dist(rng);
}

Linear::Linear(int in, int out, Rng& rng) {
    weight = Tensor::zeros({in, out}, true);
    bias = Tensor::zeros({1, out}, true);
    init_he_uniform(weight, in, rng);
}

Tensor Linear::forward(const Tensor& x) const {
    return add_rowvec(matmul(x, weight), bias);
}

void Linear::collect(std::vector<Tensor>& params) const {
    params.push_back(weight);
    params.push_back(bias);
}

AttentionBlock::AttentionBlock(int dim, Rng& rng)
    : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng) {}

Tensor AttentionBlock::forward(const Tensor& tokens, int block_rows) const {
    Tensor q = wq.forward(tokens);
    Tensor k = wk.forward(tokens);
    Tensor v = wv.forward(tokens);
    return wo.forward(blockwise_attention(q, k, v, block_rows));
}

void AttentionBlock::collect(std::vector<Tensor>& params) const {
    wq.collect(params);
    wk.collect(params);
    wv.collect(params);
    wo.collect(params);
}

SwiGluBlock::SwiGluBlock(int dim, Rng& rng)
    : in(dim, 2 * dim, rng), out(dim, dim, rng) {}

Tensor SwiGluBlock::forward(const Tensor& x) const {
    const int dim = in.weight.cols() / 2;
    Tensor both = in.forward(x);
    Tensor gate = silu(slice_cols(both, 0, dim));
    Tensor value = slice_cols(both, dim, 2 * dim);
    return out.forward(mul(gate, value));
}

void SwiGluBlock::collect(std::vector<Tensor>& params) const {
    in.collect(params);
    out.collect(params);
}

}  // namespace miturbo::nn
