#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

// Minimal reverse-mode autodiff over dense double matrices. A computation
// builds a fresh expression graph per forward pass; backward() walks it once
// in reverse topological order. Rows are nodes/edges/agents, columns are
// feature channels.
namespace ffinet::ad {

using Matrix = Eigen::MatrixXd;

struct Node;
using Var = std::shared_ptr<Node>;

struct Node {
    Matrix value;
    Matrix grad;  // allocated on demand, same shape as value
    bool requires_grad = false;
    std::vector<Var> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Matrix& g) {
        if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
        grad += g;
    }
};

inline Var constant(Matrix m) {
    auto n = std::make_shared<Node>();
    n->value = std::move(m);
    return n;
}

inline Var leaf(Matrix m) {
    auto n = std::make_shared<Node>();
    n->value = std::move(m);
    n->requires_grad = true;
    return n;
}

namespace detail {

inline Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& p : parents)
        if (p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

}  // namespace detail

// Multiply-accumulate counter for cost reporting; covers the dense products
// where essentially all of the model's arithmetic happens.
inline thread_local long long mac_count = 0;

inline Var matmul(const Var& a, const Var& b) {
    mac_count += static_cast<long long>(a->value.rows()) * a->value.cols() * b->value.cols();
    return detail::make(a->value * b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * b->value.transpose());
        if (b->requires_grad) b->accumulate(a->value.transpose() * n.grad);
    });
}

inline Var add(const Var& a, const Var& b) {
    return detail::make(a->value + b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    });
}

inline Var sub(const Var& a, const Var& b) {
    return detail::make(a->value - b->value, {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(-n.grad);
    });
}

// Adds a 1 x C bias row to every row of a.
inline Var add_bias(const Var& a, const Var& bias) {
    Matrix v = a->value;
    v.rowwise() += bias->value.row(0);
    return detail::make(std::move(v), {a, bias}, [a, bias](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (bias->requires_grad) bias->accumulate(n.grad.colwise().sum());
    });
}

inline Var scale(const Var& a, double s) {
    return detail::make(a->value * s, {a}, [a, s](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad * s);
    });
}

inline Var mul_elem(const Var& a, const Var& b) {
    return detail::make(a->value.cwiseProduct(b->value), {a, b}, [a, b](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(b->value));
        if (b->requires_grad) b->accumulate(n.grad.cwiseProduct(a->value));
    });
}

inline Var relu(const Var& a) {
    return detail::make(a->value.cwiseMax(0.0), {a}, [a](Node& n) {
        if (!a->requires_grad) return;
        a->accumulate(n.grad.cwiseProduct((a->value.array() > 0.0).cast<double>().matrix()));
    });
}

// Per-row layer normalization with learned gain/bias (both 1 x C).
inline Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps = 1e-5) {
    const Matrix& x = a->value;
    const Eigen::Index cols = x.cols();
    Eigen::VectorXd mean = x.rowwise().mean();
    Matrix centered = x.colwise() - mean;
    Eigen::VectorXd inv_std =
        ((centered.array().square().rowwise().sum() / static_cast<double>(cols)) + eps).sqrt().inverse();
    Matrix xhat = centered.array().colwise() * inv_std.array();
    Matrix y = (xhat.array().rowwise() * gain->value.row(0).array()).matrix();
    y.rowwise() += bias->value.row(0);
    return detail::make(std::move(y), {a, gain, bias},
                        [a, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                            const Eigen::Index cols = n.grad.cols();
                            Matrix dxhat = n.grad.array().rowwise() * gain->value.row(0).array();
                            if (gain->requires_grad)
                                gain->accumulate(n.grad.cwiseProduct(xhat).colwise().sum());
                            if (bias->requires_grad) bias->accumulate(n.grad.colwise().sum());
                            if (!a->requires_grad) return;
                            Eigen::VectorXd s1 = dxhat.rowwise().sum();
                            Eigen::VectorXd s2 = dxhat.cwiseProduct(xhat).rowwise().sum();
                            Matrix dx = static_cast<double>(cols) * dxhat;
                            dx.colwise() -= s1;
                            dx -= (xhat.array().colwise() * s2.array()).matrix();
                            dx.array().colwise() *= inv_std.array() / static_cast<double>(cols);
                            a->accumulate(dx);
                        });
}

inline Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    Eigen::Index rows = parts[0]->value.rows(), cols = 0;
    for (const auto& p : parts) cols += p->value.cols();
    Matrix v(rows, cols);
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p->value.cols()) = p->value;
        off += p->value.cols();
    }
    return detail::make(std::move(v), parts, [parts](Node& n) {
        Eigen::Index off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad) p->accumulate(n.grad.middleCols(off, p->value.cols()));
            off += p->value.cols();
        }
    });
}

inline Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index len) {
    return detail::make(a->value.middleCols(start, len), {a}, [a, start, len](Node& n) {
        if (!a->requires_grad) return;
        Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
        g.middleCols(start, len) = n.grad;
        a->accumulate(g);
    });
}

// Picks rows by index; index -1 yields a zero row (used for padding).
inline Var gather_rows(const Var& a, std::vector<Eigen::Index> idx) {
    Matrix v = Matrix::Zero(static_cast<Eigen::Index>(idx.size()), a->value.cols());
    for (size_t r = 0; r < idx.size(); ++r)
        if (idx[r] >= 0) v.row(static_cast<Eigen::Index>(r)) = a->value.row(idx[r]);
    return detail::make(std::move(v), {a}, [a, idx = std::move(idx)](Node& n) {
        if (!a->requires_grad) return;
        Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
        for (size_t r = 0; r < idx.size(); ++r)
            if (idx[r] >= 0) g.row(idx[r]) += n.grad.row(static_cast<Eigen::Index>(r));
        a->accumulate(g);
    });
}

// Sums row r of a into output row idx[r]; index -1 rows are dropped.
inline Var scatter_sum_rows(const Var& a, std::vector<Eigen::Index> idx, Eigen::Index out_rows) {
    Matrix v = Matrix::Zero(out_rows, a->value.cols());
    for (size_t r = 0; r < idx.size(); ++r)
        if (idx[r] >= 0) v.row(idx[r]) += a->value.row(static_cast<Eigen::Index>(r));
    return detail::make(std::move(v), {a}, [a, idx = std::move(idx)](Node& n) {
        if (!a->requires_grad) return;
        Matrix g = Matrix::Zero(a->value.rows(), a->value.cols());
        for (size_t r = 0; r < idx.size(); ++r)
            if (idx[r] >= 0) g.row(static_cast<Eigen::Index>(r)) = n.grad.row(idx[r]);
        a->accumulate(g);
    });
}

// Multiplies each row by its own scalar weight.
inline Var scale_rows(const Var& a, Eigen::VectorXd w) {
    Matrix v = a->value.array().colwise() * w.array();
    return detail::make(std::move(v), {a}, [a, w = std::move(w)](Node& n) {
        if (a->requires_grad) a->accumulate((n.grad.array().colwise() * w.array()).matrix());
    });
}

/// Regroups consecutive blocks of `group` rows into single rows:
// (G*group) x C -> G x (group*C), block row r occupying columns [r*C, (r+1)*C).
inline Var reshape_rows(const Var& a, Eigen::Index group) {
    const Eigen::Index rows = a->value.rows(), cols = a->value.cols();
    if (rows % group != 0) throw std::invalid_argument("reshape_rows: rows not divisible by group");
    Matrix v(rows / group, group * cols);
    for (Eigen::Index g = 0; g < rows / group; ++g)
        for (Eigen::Index r = 0; r < group; ++r) v.block(g, r * cols, 1, cols) = a->value.row(g * group + r);
    return detail::make(std::move(v), {a}, [a, group, cols](Node& n) {
        if (!a->requires_grad) return;
        Matrix g(a->value.rows(), cols);
        for (Eigen::Index b = 0; b < n.grad.rows(); ++b)
            for (Eigen::Index r = 0; r < group; ++r) g.row(b * group + r) = n.grad.block(b, r * cols, 1, cols);
        a->accumulate(g);
    });
}

// Inverse of reshape_rows: G x (group*C) -> (G*group) x C.
inline Var split_rows(const Var& a, Eigen::Index group) {
    const Eigen::Index rows = a->value.rows(), cols = a->value.cols();
    if (cols % group != 0) throw std::invalid_argument("split_rows: cols not divisible by group");
    const Eigen::Index out_cols = cols / group;
    Matrix v(rows * group, out_cols);
    for (Eigen::Index g = 0; g < rows; ++g)
        for (Eigen::Index r = 0; r < group; ++r)
            v.row(g * group + r) = a->value.block(g, r * out_cols, 1, out_cols);
    return detail::make(std::move(v), {a}, [a, group, out_cols](Node& n) {
        if (!a->requires_grad) return;
        Matrix g(a->value.rows(), a->value.cols());
        for (Eigen::Index b = 0; b < a->value.rows(); ++b)
            for (Eigen::Index r = 0; r < group; ++r)
                g.block(b, r * out_cols, 1, out_cols) = n.grad.row(b * group + r);
        a->accumulate(g);
    });
}

inline Var sum_all(const Var& a) {
    Matrix v(1, 1);
    v(0, 0) = a->value.sum();
    return detail::make(std::move(v), {a}, [a](Node& n) {
        if (a->requires_grad)
            a->accumulate(Matrix::Constant(a->value.rows(), a->value.cols(), n.grad(0, 0)));
    });
}

/// Elementwise smooth L1 (Huber): 0.5 x^2 / delta for |x| <= delta, else |x| - delta/2.
inline Var smooth_l1(const Var& a, double delta = 1.0) {
    auto f = [delta](double x) {
        const double ax = std::abs(x);
        return ax <= delta ? 0.5 * x * x / delta : ax - 0.5 * delta;
    };
    Matrix v = a->value.unaryExpr(f);
    return detail::make(std::move(v), {a}, [a, delta](Node& n) {
        if (!a->requires_grad) return;
        Matrix d = a->value.unaryExpr(
            [delta](double x) { return std::abs(x) <= delta ? x / delta : (x > 0.0 ? 1.0 : -1.0); });
        a->accumulate(n.grad.cwiseProduct(d));
    });
}

inline Var mul_const(const Var& a, Matrix c) {
    Matrix v = a->value.cwiseProduct(c);
    return detail::make(std::move(v), {a}, [a, c = std::move(c)](Node& n) {
        if (a->requires_grad) a->accumulate(n.grad.cwiseProduct(c));
    });
}

// Runs reverse-mode accumulation from a scalar (1x1) root.
inline void backward(const Var& root) {
    if (root->value.size() != 1) throw std::invalid_argument("backward: root must be scalar");
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Var, size_t>> stack;  // node, next parent index
    stack.push_back({root, 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Var p = node->parents[next++];
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back({p, 0});
        } else {
            order.push_back(node.get());
            stack.pop_back();
        }
    }
    root->grad = Matrix::Ones(1, 1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
    }
}

}  // namespace ffinet::ad
