#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls the library routine it is meant to check.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include "sparseland/activation.hpp"
#include "sparseland/linalg.hpp"
#include "sparseland/net_core.hpp"

namespace oracle {

using sparseland::Matrix;
using sparseland::Mask;
using sparseland::SparseNet;
using sparseland::Vector;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) e(r, c) = m(r, c);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index r = 0; r < e.rows(); ++r)
        for (Eigen::Index c = 0; c < e.cols(); ++c) m(r, c) = e(r, c);
    return m;
}

inline Eigen::MatrixXd random_eigen(std::mt19937_64& g, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = n(g);
    return m;
}

inline Matrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c) {
    return from_eigen(random_eigen(g, r, c));
}

/// Output of the net computed one scalar at a time, reading the mask
/// explicitly instead of relying on zeroed weights.
inline Matrix naive_forward(const SparseNet& net, const Matrix& x) {
    Matrix out(net.output_dim(), x.cols());
    for (std::size_t s = 0; s < x.cols(); ++s) {
        std::vector<double> h(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) h[i] = x(i, s);
        for (std::size_t k = 0; k < net.depth(); ++k) {
            const auto& l = net.layer(k);
            std::vector<double> next(l.out_dim(), 0.0);
            for (std::size_t r = 0; r < l.out_dim(); ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < l.in_dim(); ++c)
                    if (l.mask()(r, c)) acc += l.weights()(r, c) * h[c];
                if (l.bias() && l.bias_mask()[r]) acc += (*l.bias())[r];
                next[r] = k + 1 < net.depth() ? net.activation()(acc) : acc;
            }
            h = std::move(next);
        }
        for (std::size_t r = 0; r < h.size(); ++r) out(r, s) = h[r];
    }
    return out;
}

/// Rows a and b of the mask agree entrywise.
inline bool same_row(const Mask& m, std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < m.cols(); ++c)
        if (m(a, c) != m(b, c)) return false;
    return true;
}

/// Every edge (layer, row, col) lying on an explicitly enumerated path that
/// starts at an input, a hidden neuron with an unmasked bias, or any hidden
/// neuron when sigma(0) != 0, and ends at an output.
inline std::set<std::tuple<std::size_t, std::size_t, std::size_t>> edges_on_paths(const SparseNet& net) {
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> keep;
    const bool constant_hidden = net.activation()(0.0) != 0.0;
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> stack;
    std::function<void(std::size_t, std::size_t)> walk = [&](std::size_t level, std::size_t node) {
        if (level == net.depth()) {
            keep.insert(stack.begin(), stack.end());
            return;
        }
        const auto& l = net.layer(level);
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            if (!l.mask()(r, node)) continue;
            stack.emplace_back(level, r, node);
            walk(level + 1, r);
            stack.pop_back();
        }
    };
    for (std::size_t i = 0; i < net.input_dim(); ++i) walk(0, i);
    for (std::size_t level = 1; level < net.depth(); ++level) {
        const auto& feeding = net.layer(level - 1);
        for (std::size_t j = 0; j < feeding.out_dim(); ++j)
            if (constant_hidden || (feeding.bias() && feeding.bias_mask()[j])) walk(level, j);
    }
    return keep;
}

/// y[r] = sum_k w[k] * xpad[r + k] with the padding of each mode written out
/// directly: FULL pads d1 - 1 zeros on both sides, SAME d1 - 1 on the right,
/// VALID none.
enum class Pad { full, same, valid };

inline Vector sliding_conv(const Vector& w, const Vector& x, Pad mode) {
    const std::size_t d1 = w.size(), d = x.size();
    std::vector<double> padded;
    std::size_t out_len = 0;
    if (mode == Pad::full) {
        padded.assign(d1 - 1, 0.0);
        padded.insert(padded.end(), x.begin(), x.end());
        padded.insert(padded.end(), d1 - 1, 0.0);
        out_len = d + d1 - 1;
    } else if (mode == Pad::same) {
        padded = x;
        padded.insert(padded.end(), d1 - 1, 0.0);
        out_len = d;
    } else {
        padded = x;
        out_len = d + 1 - d1;
    }
    Vector y(out_len, 0.0);
    for (std::size_t r = 0; r < out_len; ++r)
        for (std::size_t k = 0; k < d1; ++k) y[r] += w[k] * padded[r + k];
    return y;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

/// Characteristic polynomial coefficients c_0..c_n (monic, c_n = 1) by the
/// Faddeev-LeVerrier recursion.
inline std::vector<double> char_poly(const Eigen::MatrixXd& a) {
    const Eigen::Index n = a.rows();
    std::vector<double> c(n + 1, 0.0);
    c[n] = 1.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    for (Eigen::Index k = 1; k <= n; ++k) {
        m = a * m + c[n - k + 1] * id;
        c[n - k] = -(a * m).trace() / static_cast<double>(k);
    }
    return c;
}

/// Real parts of the roots of a monic polynomial, from its companion matrix.
inline std::vector<double> poly_roots(const std::vector<double>& c) {
    const Eigen::Index n = static_cast<Eigen::Index>(c.size()) - 1;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < n; ++i) comp(i, n - 1) = -c[i];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
    std::vector<double> roots;
    for (Eigen::Index i = 0; i < n; ++i) roots.push_back(es.eigenvalues()(i).real());
    std::sort(roots.begin(), roots.end());
    return roots;
}

}  // namespace oracle
