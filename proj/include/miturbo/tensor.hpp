#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

// Reverse-mode autodiff on dense double arrays. A Tensor is a value-semantic
// handle to a graph node; ops build the graph dynamically and backward()
// walks it once in reverse topological order, accumulating gradients
// additively into every node that requires them. Graphs are per-call and
// never shared between threads.
namespace miturbo::nn {

using Shape = std::vector<int>;
using Rng = std::mt19937_64;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // lazily allocated, same size as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    int rows() const;  // 2-D convenience
    int cols() const;

    const std::vector<double>& values() const;
    std::vector<double>& mutable_values();  // leaf updates (optimizer)
    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;

    double item() const;  // value of a one-element tensor

    // Runs reverse-mode accumulation from this scalar. Throws
    // std::logic_error when called on an undefined or non-scalar tensor.
    void backward() const;

    void zero_grad() const;

    // Same values, no graph history, no gradient.
    Tensor detach() const;

    // Internal: ops need node access.
    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

// ---- elementwise / structural ops ----
Tensor add(const Tensor& a, const Tensor& b);         // same shape
Tensor add_rowvec(const Tensor& a, const Tensor& b);  // [N,C] + [1,C]
Tensor sub(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double k);
Tensor add_scalar(const Tensor& a, double k);

Tensor matmul(const Tensor& a, const Tensor& b);     // [M,K]·[K,N]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [M,K]·[N,K]^T
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor silu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor log_sigmoid(const Tensor& a);
Tensor log1mexp(const Tensor& a);  // inputs must be < 0

// ---- row/column reductions over 2-D tensors ----
Tensor softmax_rows(const Tensor& a);
Tensor log_softmax_rows(const Tensor& a);
Tensor logsumexp_rows(const Tensor& a);  // [N,C] -> [N,1]
Tensor logsumexp_cols(const Tensor& a);  // [N,C] -> [1,C]
Tensor sum_all(const Tensor& a);         // -> scalar
Tensor mean_all(const Tensor& a);        // -> scalar

// a[i, idx[i]] -> [N,1]; idx entries must be in [0, cols).
Tensor gather_rows_entry(const Tensor& a, const std::vector<int>& idx);
// From a [1,C] row vector, pick column idx[i] for each i -> [N,1].
Tensor select_cols(const Tensor& a, const std::vector<int>& idx);
Tensor slice_cols(const Tensor& a, int c0, int c1);
// Row subset (with repetition allowed): out row i = a row idx[i].
Tensor select_rows(const Tensor& a, const std::vector<int>& idx);
Tensor concat_cols(const Tensor& a, const Tensor& b);

// Same flat buffer under a new shape (row-major order preserved).
Tensor reshape(const Tensor& a, Shape shape);

// Mean over each block of T consecutive rows: [N*T, D] -> [N, D].
Tensor mean_pool_blocks(const Tensor& a, int block_rows);
Tensor l2_normalize_rows(const Tensor& a);  // throws on zero-norm rows

// Inverted dropout; identity when train is false or p == 0.
Tensor dropout(const Tensor& a, double p, Rng& rng, bool train);

// Scaled dot-product attention applied independently to each block of
// `block_rows` consecutive rows (one block per sample): for each block
// softmax(Q K^T / sqrt(D)) V. Shapes all [N*T, D].
Tensor blockwise_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           int block_rows);

}  // namespace miturbo::nn
