#include "miturbo/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "miturbo/stablemath.hpp"

namespace miturbo::nn {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        require(d > 0, "tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

NodePtr make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    auto n = std::make_shared<Node>();
    require(shape_numel(shape) == values.size(), "tensor: shape/value mismatch");
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}

// Result node whose requires_grad is inherited from the parents.
NodePtr make_result(Shape shape, std::vector<double> values,
                    std::vector<NodePtr> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    for (const auto& p : parents) {
        if (p->requires_grad) n->requires_grad = true;
    }
    n->parents = std::move(parents);
    return n;
}

const NodePtr& checked(const Tensor& t, const char* msg) {
    if (!t.defined()) throw std::invalid_argument(msg);
    return t.node();
}

void check_2d(const Node& n, const char* msg) {
    require(n.shape.size() == 2, msg);
}

}  // namespace

// ---- Tensor handle ----

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0),
                            requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(make_leaf({1}, {v}, requires_grad));
}

const Shape& Tensor::shape() const {
    return checked(*this, "tensor: undefined")->shape;
}

std::size_t Tensor::size() const {
    return checked(*this, "tensor: undefined")->size();
}

int Tensor::rows() const {
    const auto& n = *checked(*this, "tensor: undefined");
    require(n.shape.size() == 2, "tensor: rows() needs a 2-D tensor");
    return n.shape[0];
}

int Tensor::cols() const {
    const auto& n = *checked(*this, "tensor: undefined");
    require(n.shape.size() == 2, "tensor: cols() needs a 2-D tensor");
    return n.shape[1];
}

const std::vector<double>& Tensor::values() const {
    return checked(*this, "tensor: undefined")->value;
}

std::vector<double>& Tensor::mutable_values() {
    return checked(*this, "tensor: undefined")->value;
}

bool Tensor::requires_grad() const {
    return checked(*this, "tensor: undefined")->requires_grad;
}

bool Tensor::has_grad() const {
    const auto& n = *checked(*this, "tensor: undefined");
    return n.grad.size() == n.value.size();
}

const std::vector<double>& Tensor::grad() const {
    const auto& n = *checked(*this, "tensor: undefined");
    if (n.grad.size() != n.value.size()) {
        throw std::logic_error("tensor: gradient not populated; call backward() first");
    }
    return n.grad;
}

double Tensor::item() const {
    const auto& n = *checked(*this, "tensor: undefined");
    require(n.size() == 1, "tensor: item() needs a one-element tensor");
    return n.value[0];
}

void Tensor::zero_grad() const {
    auto& n = *checked(*this, "tensor: undefined");
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    const auto& n = *checked(*this, "tensor: undefined");
    return Tensor(make_leaf(n.shape, n.value, false));
}

void Tensor::backward() const {
    if (!defined()) {
        throw std::logic_error("backward: no forward graph (undefined tensor)");
    }
    const auto& root = node_;
    require(root->size() == 1, "backward: root must be scalar");

    // Post-order DFS, then replay in reverse so every consumer runs before
    // the node it feeds.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) {
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->requires_grad && node->backward_fn) {
            node->ensure_grad();
            node->backward_fn();
        }
    }
}

// ---- op helpers ----

namespace {

// Elementwise unary op: f(value) and df(value) * upstream.
template <typename F, typename DF>
Tensor unary_op(const Tensor& a, F f, DF df, const char* name) {
    const NodePtr& an = checked(a, name);
    std::vector<double> out(an->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(an->value[i]);
    auto res = make_result(an->shape, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, df]() {
            p->ensure_grad();
            for (std::size_t i = 0; i < r->size(); ++i) {
                p->grad[i] += r->grad[i] * df(p->value[i]);
            }
        };
    }
    return Tensor(res);
}

}  // namespace

// ---- elementwise / structural ----

Tensor add(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "add");
    const NodePtr& bn = checked(b, "add");
    require(an->shape == bn->shape, "add: shape mismatch");
    std::vector<double> out(an->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = an->value[i] + bn->value[i];
    }
    auto res = make_result(an->shape, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < r->size(); ++i) pa->grad[i] += r->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < r->size(); ++i) pb->grad[i] += r->grad[i];
            }
        };
    }
    return Tensor(res);
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "add_rowvec");
    const NodePtr& bn = checked(b, "add_rowvec");
    check_2d(*an, "add_rowvec: matrix must be 2-D");
    const int n = an->shape[0], c = an->shape[1];
    require(static_cast<std::size_t>(c) == bn->size(), "add_rowvec: width mismatch");
    std::vector<double> out(an->size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
            out[i * c + j] = an->value[i * c + j] + bn->value[j];
        }
    }
    auto res = make_result(an->shape, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb, n, c]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < r->size(); ++i) pa->grad[i] += r->grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < c; ++j) pb->grad[j] += r->grad[i * c + j];
                }
            }
        };
    }
    return Tensor(res);
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor neg(const Tensor& a) {
    return unary_op(a, [](double v) { return -v; }, [](double) { return -1.0; }, "neg");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "mul");
    const NodePtr& bn = checked(b, "mul");
    require(an->shape == bn->shape, "mul: shape mismatch");
    std::vector<double> out(an->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = an->value[i] * bn->value[i];
    }
    auto res = make_result(an->shape, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < r->size(); ++i) {
                    pa->grad[i] += r->grad[i] * pb->value[i];
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < r->size(); ++i) {
                    pb->grad[i] += r->grad[i] * pa->value[i];
                }
            }
        };
    }
    return Tensor(res);
}

Tensor scale(const Tensor& a, double k) {
    return unary_op(a, [k](double v) { return k * v; }, [k](double) { return k; },
                    "scale");
}

Tensor add_scalar(const Tensor& a, double k) {
    return unary_op(a, [k](double v) { return v + k; }, [](double) { return 1.0; },
                    "add_scalar");
}

// ---- matrix products ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "matmul");
    const NodePtr& bn = checked(b, "matmul");
    check_2d(*an, "matmul: 2-D operands required");
    check_2d(*bn, "matmul: 2-D operands required");
    const int m = an->shape[0], k = an->shape[1];
    require(bn->shape[0] == k, "matmul: inner dimension mismatch");
    const int n = bn->shape[1];

    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int kk = 0; kk < k; ++kk) {
            const double av = an->value[i * k + kk];
            if (av == 0.0) continue;
            const double* brow = &bn->value[static_cast<std::size_t>(kk) * n];
            double* orow = &out[static_cast<std::size_t>(i) * n];
            for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    auto res = make_result({m, n}, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb, m, k, n]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                // dA = dC · B^T
                for (int i = 0; i < m; ++i) {
                    for (int kk = 0; kk < k; ++kk) {
                        double acc = 0.0;
                        const double* grow = &r->grad[static_cast<std::size_t>(i) * n];
                        const double* brow = &pb->value[static_cast<std::size_t>(kk) * n];
                        for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        pa->grad[i * k + kk] += acc;
                    }
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                // dB = A^T · dC
                for (int kk = 0; kk < k; ++kk) {
                    for (int i = 0; i < m; ++i) {
                        const double av = pa->value[i * k + kk];
                        if (av == 0.0) continue;
                        const double* grow = &r->grad[static_cast<std::size_t>(i) * n];
                        double* brow = &pb->grad[static_cast<std::size_t>(kk) * n];
                        for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        };
    }
    return Tensor(res);
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "matmul_nt");
    const NodePtr& bn = checked(b, "matmul_nt");
    check_2d(*an, "matmul_nt: 2-D operands required");
    check_2d(*bn, "matmul_nt: 2-D operands required");
    const int m = an->shape[0], k = an->shape[1];
    require(bn->shape[1] == k, "matmul_nt: inner dimension mismatch");
    const int n = bn->shape[0];

    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        const double* arow = &an->value[static_cast<std::size_t>(i) * k];
        for (int j = 0; j < n; ++j) {
            const double* brow = &bn->value[static_cast<std::size_t>(j) * k];
            double acc = 0.0;
            for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            out[i * n + j] = acc;
        }
    }
    auto res = make_result({m, n}, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb, m, k, n]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                // dA = dC · B
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < n; ++j) {
                        const double g = r->grad[i * n + j];
                        if (g == 0.0) continue;
                        const double* brow = &pb->value[static_cast<std::size_t>(j) * k];
                        double* arow = &pa->grad[static_cast<std::size_t>(i) * k];
                        for (int kk = 0; kk < k; ++kk) arow[kk] += g * brow[kk];
                    }
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                // dB = dC^T · A
                for (int j = 0; j < n; ++j) {
                    for (int i = 0; i < m; ++i) {
                        const double g = r->grad[i * n + j];
                        if (g == 0.0) continue;
                        const double* arow = &pa->value[static_cast<std::size_t>(i) * k];
                        double* brow = &pb->grad[static_cast<std::size_t>(j) * k];
                        for (int kk = 0; kk < k; ++kk) brow[kk] += g * arow[kk];
                    }
                }
            }
        };
    }
    return Tensor(res);
}

Tensor transpose(const Tensor& a) {
    const NodePtr& an = checked(a, "transpose");
    check_2d(*an, "transpose: 2-D tensor required");
    const int m = an->shape[0], n = an->shape[1];
    std::vector<double> out(an->size());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out[j * m + i] = an->value[i * n + j];
    }
    auto res = make_result({n, m}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, m, n]() {
            p->ensure_grad();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) p->grad[i * n + j] += r->grad[j * m + i];
            }
        };
    }
    return Tensor(res);
}

// ---- activations / elementwise transcendental ----

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v) { return v > 0.0 ? 1.0 : 0.0; }, "relu");
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary_op(
        a, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v) { return v > 0.0 ? 1.0 : slope; }, "leaky_relu");
}

Tensor silu(const Tensor& a) {
    return unary_op(
        a,
        [](double v) { return v * stablemath::sigmoid(v); },
        [](double v) {
            const double s = stablemath::sigmoid(v);
            return s * (1.0 + v * (1.0 - s));
        },
        "silu");
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](double v) { return std::exp(v); },
                    [](double v) { return std::exp(v); }, "exp");
}

Tensor log(const Tensor& a) {
    const NodePtr& an = checked(a, "log");
    for (double v : an->value) {
        if (!(v > 0.0)) throw std::domain_error("log: non-positive input");
    }
    return unary_op(a, [](double v) { return std::log(v); },
                    [](double v) { return 1.0 / v; }, "log");
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double v) { return stablemath::sigmoid(v); },
        [](double v) {
            const double s = stablemath::sigmoid(v);
            return s * (1.0 - s);
        },
        "sigmoid");
}

Tensor log_sigmoid(const Tensor& a) {
    return unary_op(
        a, [](double v) { return stablemath::log_sigmoid(v); },
        [](double v) { return stablemath::sigmoid(-v); }, "log_sigmoid");
}

Tensor log1mexp(const Tensor& a) {
    const NodePtr& an = checked(a, "log1mexp");
    for (double v : an->value) {
        if (!(v < 0.0)) throw std::domain_error("log1mexp: inputs must be negative");
    }
    return unary_op(
        a, [](double v) { return stablemath::log1mexp(v); },
        [](double v) { return -1.0 / std::expm1(-v); }, "log1mexp");
}

// ---- row/column reductions ----

Tensor softmax_rows(const Tensor& a) {
    const NodePtr& an = checked(a, "softmax_rows");
    check_2d(*an, "softmax_rows: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    std::vector<double> out(an->size());
    for (int i = 0; i < n; ++i) {
        auto row = stablemath::softmax(
            std::span<const double>(&an->value[static_cast<std::size_t>(i) * c], c));
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::size_t>(i) * c);
    }
    auto res = make_result(an->shape, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, c]() {
            p->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* y = &r->value[static_cast<std::size_t>(i) * c];
                const double* g = &r->grad[static_cast<std::size_t>(i) * c];
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += g[j] * y[j];
                double* dx = &p->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) dx[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return Tensor(res);
}

Tensor log_softmax_rows(const Tensor& a) {
    const NodePtr& an = checked(a, "log_softmax_rows");
    check_2d(*an, "log_softmax_rows: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    std::vector<double> out(an->size());
    for (int i = 0; i < n; ++i) {
        auto row = stablemath::log_softmax(
            std::span<const double>(&an->value[static_cast<std::size_t>(i) * c], c));
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::size_t>(i) * c);
    }
    auto res = make_result(an->shape, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, c]() {
            p->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* y = &r->value[static_cast<std::size_t>(i) * c];
                const double* g = &r->grad[static_cast<std::size_t>(i) * c];
                double gsum = 0.0;
                for (int j = 0; j < c; ++j) gsum += g[j];
                double* dx = &p->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) dx[j] += g[j] - std::exp(y[j]) * gsum;
            }
        };
    }
    return Tensor(res);
}

Tensor logsumexp_rows(const Tensor& a) {
    const NodePtr& an = checked(a, "logsumexp_rows");
    check_2d(*an, "logsumexp_rows: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        out[i] = stablemath::logsumexp(
            std::span<const double>(&an->value[static_cast<std::size_t>(i) * c], c));
    }
    auto res = make_result({n, 1}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, c]() {
            p->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double g = r->grad[i];
                if (g == 0.0) continue;
                const double lse = r->value[i];
                const double* x = &p->value[static_cast<std::size_t>(i) * c];
                double* dx = &p->grad[static_cast<std::size_t>(i) * c];
                for (int j = 0; j < c; ++j) dx[j] += g * std::exp(x[j] - lse);
            }
        };
    }
    return Tensor(res);
}

Tensor logsumexp_cols(const Tensor& a) {
    const NodePtr& an = checked(a, "logsumexp_cols");
    check_2d(*an, "logsumexp_cols: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    std::vector<double> col(n);
    std::vector<double> out(c);
    for (int j = 0; j < c; ++j) {
        for (int i = 0; i < n; ++i) col[i] = an->value[static_cast<std::size_t>(i) * c + j];
        out[j] = stablemath::logsumexp(col);
    }
    auto res = make_result({1, c}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, c]() {
            p->ensure_grad();
            for (int j = 0; j < c; ++j) {
                const double g = r->grad[j];
                if (g == 0.0) continue;
                const double lse = r->value[j];
                for (int i = 0; i < n; ++i) {
                    const std::size_t at = static_cast<std::size_t>(i) * c + j;
                    p->grad[at] += g * std::exp(p->value[at] - lse);
                }
            }
        };
    }
    return Tensor(res);
}

Tensor sum_all(const Tensor& a) {
    const NodePtr& an = checked(a, "sum_all");
    const double s = stablemath::stable_sum(an->value);
    auto res = make_result({1}, {s}, {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p]() {
            p->ensure_grad();
            const double g = r->grad[0];
            for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += g;
        };
    }
    return Tensor(res);
}

Tensor mean_all(const Tensor& a) {
    const NodePtr& an = checked(a, "mean_all");
    return scale(sum_all(a), 1.0 / static_cast<double>(an->size()));
}

// ---- indexing / layout ----

Tensor gather_rows_entry(const Tensor& a, const std::vector<int>& idx) {
    const NodePtr& an = checked(a, "gather_rows_entry");
    check_2d(*an, "gather_rows_entry: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    require(static_cast<int>(idx.size()) == n, "gather_rows_entry: index count mismatch");
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) {
        require(idx[i] >= 0 && idx[i] < c, "gather_rows_entry: index out of range");
        out[i] = an->value[static_cast<std::size_t>(i) * c + idx[i]];
    }
    auto res = make_result({n, 1}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, idx, c]() {
            p->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                p->grad[i * c + idx[i]] += r->grad[i];
            }
        };
    }
    return Tensor(res);
}

Tensor select_cols(const Tensor& a, const std::vector<int>& idx) {
    const NodePtr& an = checked(a, "select_cols");
    check_2d(*an, "select_cols: 2-D tensor required");
    require(an->shape[0] == 1, "select_cols: source must be a [1,C] row");
    const int c = an->shape[1];
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < c, "select_cols: index out of range");
        out[i] = an->value[idx[i]];
    }
    auto res = make_result({static_cast<int>(idx.size()), 1}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, idx]() {
            p->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                p->grad[idx[i]] += r->grad[i];
            }
        };
    }
    return Tensor(res);
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    const NodePtr& an = checked(a, "slice_cols");
    check_2d(*an, "slice_cols: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    require(0 <= c0 && c0 < c1 && c1 <= c, "slice_cols: bad range");
    const int w = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(n) * w);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < w; ++j) {
            out[i * w + j] = an->value[static_cast<std::size_t>(i) * c + c0 + j];
        }
    }
    auto res = make_result({n, w}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, c, c0, w]() {
            p->ensure_grad();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < w; ++j) {
                    p->grad[static_cast<std::size_t>(i) * c + c0 + j] += r->grad[i * w + j];
                }
            }
        };
    }
    return Tensor(res);
}

Tensor select_rows(const Tensor& a, const std::vector<int>& idx) {
    const NodePtr& an = checked(a, "select_rows");
    check_2d(*an, "select_rows: 2-D tensor required");
    const int n = an->shape[0], c = an->shape[1];
    require(!idx.empty(), "select_rows: empty index list");
    std::vector<double> out(idx.size() * static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        require(idx[i] >= 0 && idx[i] < n, "select_rows: index out of range");
        const double* src = &an->value[static_cast<std::size_t>(idx[i]) * c];
        std::copy(src, src + c, out.begin() + i * c);
    }
    auto res = make_result({static_cast<int>(idx.size()), c}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, idx, c]() {
            p->ensure_grad();
            for (std::size_t i = 0; i < idx.size(); ++i) {
                const double* g = &r->grad[i * c];
                double* dst = &p->grad[static_cast<std::size_t>(idx[i]) * c];
                for (int j = 0; j < c; ++j) dst[j] += g[j];
            }
        };
    }
    return Tensor(res);
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    const NodePtr& an = checked(a, "concat_cols");
    const NodePtr& bn = checked(b, "concat_cols");
    check_2d(*an, "concat_cols: 2-D tensors required");
    check_2d(*bn, "concat_cols: 2-D tensors required");
    require(an->shape[0] == bn->shape[0], "concat_cols: row count mismatch");
    const int n = an->shape[0], ca = an->shape[1], cb = bn->shape[1];
    const int c = ca + cb;
    std::vector<double> out(static_cast<std::size_t>(n) * c);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < ca; ++j) out[i * c + j] = an->value[i * ca + j];
        for (int j = 0; j < cb; ++j) out[i * c + ca + j] = bn->value[i * cb + j];
    }
    auto res = make_result({n, c}, std::move(out), {an, bn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pa = an.get();
        Node* pb = bn.get();
        res->backward_fn = [r, pa, pb, n, ca, cb, c]() {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < ca; ++j) pa->grad[i * ca + j] += r->grad[i * c + j];
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < cb; ++j) {
                        pb->grad[i * cb + j] += r->grad[i * c + ca + j];
                    }
                }
            }
        };
    }
    return Tensor(res);
}

Tensor reshape(const Tensor& a, Shape shape) {
    const NodePtr& an = checked(a, "reshape");
    require(shape_numel(shape) == an->size(), "reshape: element count mismatch");
    auto res = make_result(std::move(shape), an->value, {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p]() {
            p->ensure_grad();
            for (std::size_t i = 0; i < r->size(); ++i) p->grad[i] += r->grad[i];
        };
    }
    return Tensor(res);
}

Tensor mean_pool_blocks(const Tensor& a, int block_rows) {
    const NodePtr& an = checked(a, "mean_pool_blocks");
    check_2d(*an, "mean_pool_blocks: 2-D tensor required");
    require(block_rows > 0, "mean_pool_blocks: block_rows must be positive");
    const int rows = an->shape[0], d = an->shape[1];
    require(rows % block_rows == 0, "mean_pool_blocks: rows not divisible by block");
    const int n = rows / block_rows;
    std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
    for (int b = 0; b < n; ++b) {
        for (int t = 0; t < block_rows; ++t) {
            const double* src = &an->value[static_cast<std::size_t>(b * block_rows + t) * d];
            for (int j = 0; j < d; ++j) out[b * d + j] += src[j];
        }
        for (int j = 0; j < d; ++j) out[b * d + j] /= block_rows;
    }
    auto res = make_result({n, d}, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, d, block_rows]() {
            p->ensure_grad();
            const double inv = 1.0 / block_rows;
            for (int b = 0; b < n; ++b) {
                for (int t = 0; t < block_rows; ++t) {
                    double* dst = &p->grad[static_cast<std::size_t>(b * block_rows + t) * d];
                    const double* g = &r->grad[static_cast<std::size_t>(b) * d];
                    for (int j = 0; j < d; ++j) dst[j] += g[j] * inv;
                }
            }
        };
    }
    return Tensor(res);
}

Tensor l2_normalize_rows(const Tensor& a) {
    const NodePtr& an = checked(a, "l2_normalize_rows");
    check_2d(*an, "l2_normalize_rows: 2-D tensor required");
    const int n = an->shape[0], d = an->shape[1];
    std::vector<double> out(an->size());
    std::vector<double> norms(n);
    for (int i = 0; i < n; ++i) {
        const double* x = &an->value[static_cast<std::size_t>(i) * d];
        double sq = 0.0;
        for (int j = 0; j < d; ++j) sq += x[j] * x[j];
        const double r = std::sqrt(sq);
        if (!(r > 0.0)) throw std::domain_error("l2_normalize_rows: zero-norm row");
        norms[i] = r;
        for (int j = 0; j < d; ++j) out[i * d + j] = x[j] / r;
    }
    auto res = make_result(an->shape, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* p = an.get();
        res->backward_fn = [r, p, n, d, norms]() {
            p->ensure_grad();
            for (int i = 0; i < n; ++i) {
                const double* y = &r->value[static_cast<std::size_t>(i) * d];
                const double* g = &r->grad[static_cast<std::size_t>(i) * d];
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += g[j] * y[j];
                double* dx = &p->grad[static_cast<std::size_t>(i) * d];
                for (int j = 0; j < d; ++j) dx[j] += (g[j] - dot * y[j]) / norms[i];
            }
        };
    }
    return Tensor(res);
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool train) {
    const NodePtr& an = checked(a, "dropout");
    require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
    if (!train || p == 0.0) {
        // Identity pass-through that keeps the graph intact.
        return scale(a, 1.0);
    }
    const double keep_scale = 1.0 / (1.0 - p);
    std::bernoulli_distribution drop(p);
    auto mult = std::make_shared<std::vector<double>>(an->size());
    std::vector<double> out(an->size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double m = drop(rng) ? 0.0 : keep_scale;
        (*mult)[i] = m;
        out[i] = an->value[i] * m;
    }
    auto res = make_result(an->shape, std::move(out), {an});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* q = an.get();
        res->backward_fn = [r, q, mult]() {
            q->ensure_grad();
            for (std::size_t i = 0; i < r->size(); ++i) {
                q->grad[i] += r->grad[i] * (*mult)[i];
            }
        };
    }
    return Tensor(res);
}

Tensor blockwise_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                           int block_rows) {
    const NodePtr& qn = checked(q, "blockwise_attention");
    const NodePtr& kn = checked(k, "blockwise_attention");
    const NodePtr& vn = checked(v, "blockwise_attention");
    check_2d(*qn, "blockwise_attention: 2-D tensors required");
    require(qn->shape == kn->shape && kn->shape == vn->shape,
            "blockwise_attention: Q/K/V shape mismatch");
    require(block_rows > 0 && qn->shape[0] % block_rows == 0,
            "blockwise_attention: rows not divisible by block");
    const int rows = qn->shape[0], d = qn->shape[1];
    const int nblocks = rows / block_rows;
    const int t = block_rows;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    // Attention weights are kept for the backward pass.
    auto attn = std::make_shared<std::vector<double>>(
        static_cast<std::size_t>(nblocks) * t * t);
    std::vector<double> out(qn->size(), 0.0);
    std::vector<double> scores(t);
    for (int b = 0; b < nblocks; ++b) {
        const std::size_t r0 = static_cast<std::size_t>(b) * t;
        for (int i = 0; i < t; ++i) {
            const double* qi = &qn->value[(r0 + i) * d];
            for (int j = 0; j < t; ++j) {
                const double* kj = &kn->value[(r0 + j) * d];
                double acc = 0.0;
                for (int c = 0; c < d; ++c) acc += qi[c] * kj[c];
                scores[j] = acc * inv_sqrt_d;
            }
            auto w = stablemath::softmax(scores);
            double* arow = &(*attn)[(r0 + i) * t];
            std::copy(w.begin(), w.end(), arow);
            double* orow = &out[(r0 + i) * d];
            for (int j = 0; j < t; ++j) {
                const double* vj = &vn->value[(r0 + j) * d];
                for (int c = 0; c < d; ++c) orow[c] += w[j] * vj[c];
            }
        }
    }
    auto res = make_result(qn->shape, std::move(out), {qn, kn, vn});
    if (res->requires_grad) {
        Node* r = res.get();
        Node* pq = qn.get();
        Node* pk = kn.get();
        Node* pv = vn.get();
        res->backward_fn = [r, pq, pk, pv, attn, nblocks, t, d, inv_sqrt_d]() {
            pq->ensure_grad();
            pk->ensure_grad();
            pv->ensure_grad();
            std::vector<double> da(t), ds(t);
            for (int b = 0; b < nblocks; ++b) {
                const std::size_t r0 = static_cast<std::size_t>(b) * t;
                for (int i = 0; i < t; ++i) {
                    const double* g = &r->grad[(r0 + i) * d];
                    const double* arow = &(*attn)[(r0 + i) * t];
                    // dV and dA from H = A V.
                    double dot = 0.0;
                    for (int j = 0; j < t; ++j) {
                        const double* vj = &pv->value[(r0 + j) * d];
                        double acc = 0.0;
                        for (int c = 0; c < d; ++c) acc += g[c] * vj[c];
                        da[j] = acc;
                        double* dvj = &pv->grad[(r0 + j) * d];
                        for (int c = 0; c < d; ++c) dvj[c] += arow[j] * g[c];
                        dot += da[j] * arow[j];
                    }
                    // Softmax jacobian, then scores -> Q, K.
                    for (int j = 0; j < t; ++j) {
                        ds[j] = arow[j] * (da[j] - dot) * inv_sqrt_d;
                    }
                    const double* qi = &pq->value[(r0 + i) * d];
                    double* dqi = &pq->grad[(r0 + i) * d];
                    for (int j = 0; j < t; ++j) {
                        if (ds[j] == 0.0) continue;
                        const double* kj = &pk->value[(r0 + j) * d];
                        double* dkj = &pk->grad[(r0 + j) * d];
                        for (int c = 0; c < d; ++c) {
                            dqi[c] += ds[j] * kj[c];
                            dkj[c] += ds[j] * qi[c];
                        }
                    }
                }
            }
        };
    }
    return Tensor(res);
}

}  // namespace miturbo::nn
