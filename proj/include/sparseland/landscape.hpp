#pragma once

// Landscape tooling: loss-preserving weight surgery, piecewise-linear descent
// paths to a global minimum for linear networks, checks of the structural
// conditions behind those paths, and rank/feature-map utilities for
// nonlinear activations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparseland/activation.hpp"
#include "sparseland/linalg.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/rng.hpp"

namespace sparseland {

// ---------------------------------------------------------------------------
// Zero columns by re-expressing dependent rows of W

struct ZeroPathResult {
    Matrix u0;
    std::vector<std::size_t> basis_rows;      // rows of W kept as a basis, ascending
    std::vector<std::size_t> dependent_rows;  // rows expressed through the basis; matching U0 columns are 0
    Matrix coefficients;                      // W[dependent] = coefficients * W[basis]
    std::size_t rank() const { return basis_rows.size(); }
};

/// Returns U0 with U0 W = U W and a zero column for every row of W that is a
/// combination of earlier rows. Rows are scanned in order, so the first
/// independent rows form the basis.
inline ZeroPathResult zero_path_transform(const Matrix& u, const Matrix& w, double rel_tol = 1e-8) {
    if (u.cols() != w.rows())
        throw std::invalid_argument("zero_path_transform: U has " + std::to_string(u.cols()) +
                                    " columns but W has " + std::to_string(w.rows()) + " rows");
    ZeroPathResult out;
    double scale = 0.0;
    for (std::size_t r = 0; r < w.rows(); ++r) scale = std::max(scale, norm(w.row(r)));
    std::vector<Vector> ortho;
    for (std::size_t r = 0; r < w.rows(); ++r) {
        Vector v(w.row(r).begin(), w.row(r).end());
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : ortho) {
                const double c = dot(v, q);
                for (std::size_t k = 0; k < v.size(); ++k) v[k] -= c * q[k];
            }
        const double nv = norm(v);
        if (scale > 0.0 && nv > rel_tol * scale) {
            for (double& x : v) x /= nv;
            ortho.push_back(std::move(v));
            out.basis_rows.push_back(r);
        } else {
            out.dependent_rows.push_back(r);
        }
    }
    out.u0 = u;
    if (out.dependent_rows.empty()) return out;
    const Matrix b = select_rows(w, out.basis_rows);
    const Matrix dep = select_rows(w, out.dependent_rows);
    out.coefficients = out.basis_rows.empty() ? Matrix(dep.rows(), 0) : dep * pinv(b);
    for (std::size_t i = 0; i < u.rows(); ++i) {
        for (std::size_t k = 0; k < out.basis_rows.size(); ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < out.dependent_rows.size(); ++j)
                acc += u(i, out.dependent_rows[j]) * out.coefficients(j, k);
            out.u0(i, out.basis_rows[k]) += acc;
        }
        for (auto j : out.dependent_rows) out.u0(i, j) = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Paths

struct PathSample {
    double t = 0.0;
    Vector parameters;
    double loss = 0.0;
};

struct PathSegment {
    std::string name;
    double t_begin = 0.0;
    double t_end = 0.0;
};

struct PathTrace {
    std::vector<PathSample> samples;
    std::vector<PathSegment> segments;
    double end_loss = 0.0;
    double monotone_violation = 0.0;  // largest increase between consecutive samples
    double optimum = 0.0;             // loss at the global minimum the path aims for
};

using PathLoss = std::function<double(std::span<const double>)>;

/// Samples a piecewise-linear path through `nodes` (each segment gets an
/// equal share of [0, 1]) on a uniform grid of n_samples points, with the
/// segment boundaries added to the grid.
inline PathTrace sample_polyline(const std::vector<Vector>& nodes, const std::vector<std::string>& names,
                                 const PathLoss& loss_fn, std::size_t n_samples) {
    if (nodes.size() < 2) throw std::invalid_argument("sample_polyline: need at least two nodes");
    if (names.size() != nodes.size() - 1) throw std::invalid_argument("sample_polyline: one name per segment");
    if (n_samples < 2) throw std::invalid_argument("sample_polyline: need at least two samples");
    const std::size_t k = nodes.size() - 1;
    std::vector<double> ts;
    for (std::size_t i = 0; i < n_samples; ++i) ts.push_back(static_cast<double>(i) / static_cast<double>(n_samples - 1));
    for (std::size_t j = 1; j < k; ++j) ts.push_back(static_cast<double>(j) / static_cast<double>(k));
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    PathTrace trace;
    for (std::size_t j = 0; j < k; ++j)
        trace.segments.push_back({names[j], static_cast<double>(j) / k, static_cast<double>(j + 1) / k});
    for (double t : ts) {
        std::size_t seg = std::min(static_cast<std::size_t>(t * k), k - 1);
        double tau = t * k - static_cast<double>(seg);
        if (t >= 1.0) seg = k - 1, tau = 1.0;
        const Vector& a = nodes[seg];
        const Vector& b = nodes[seg + 1];
        Vector p(a.size());
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = tau == 1.0 ? b[i] : a[i] + tau * (b[i] - a[i]);
        const double l = loss_fn(p);
        trace.samples.push_back({t, std::move(p), l});
    }
    for (std::size_t i = 1; i < trace.samples.size(); ++i)
        trace.monotone_violation =
            std::max(trace.monotone_violation, trace.samples[i].loss - trace.samples[i - 1].loss);
    trace.end_loss = trace.samples.back().loss;
    return trace;
}

namespace detail {

// Orthonormal basis of the null space of `w` (p x d): eigenvectors of W^T W
// for the d - rank(W) smallest eigenvalues.
inline std::vector<Vector> null_space(const Matrix& w) {
    const std::size_t d = w.cols();
    const std::size_t r = w.rows() == 0 ? 0 : numerical_rank(w);
    const SymEigResult eig = w.rows() == 0 ? SymEigResult{Vector(d, 0.0), Matrix::identity(d)}
                                           : sym_eig(transpose(w) * w);
    std::vector<Vector> out;
    for (std::size_t k = 0; k + r < d; ++k) out.push_back(column(eig.vectors, k));
    return out;
}

}  // namespace detail

/// Two-layer linear network written per pattern: U (d_y x p) with W_i the
/// first-layer block of group i. Flat parameters: U row-major, then each
/// W_i row-major.
struct GroupedLinearParams {
    Matrix u;
    std::vector<Matrix> w;

    Vector flatten() const {
        Vector out(u.values());
        for (const auto& b : w) out.insert(out.end(), b.values().begin(), b.values().end());
        return out;
    }
    GroupedLinearParams unflatten(std::span<const double> p) const {
        GroupedLinearParams out = *this;
        std::size_t pos = 0;
        for (double& v : out.u.values()) v = p[pos++];
        for (auto& b : out.w)
            for (double& v : b.values()) v = p[pos++];
        return out;
    }
};

inline double grouped_linear_loss(const PatternDecomposition& d, const GroupedLinearParams& prm, const Matrix& y) {
    const auto u_blocks = group_output_weights(prm.u, d);
    return 0.5 * frobenius_norm_sq(pattern_output(u_blocks, prm.w, d.data_slices) - y);
}

/// 1/2 || Y Z^+ Z - Y ||^2 with Z the stacked data slices.
inline double pattern_block_optimum(const PatternDecomposition& d, const Matrix& y) {
    const Matrix z = vstack(d.data_slices);
    return 0.5 * frobenius_norm_sq(y * pinv(z) * z - y);
}

/// Descent path for a linear two-layer net whose groups satisfy p_i >= d_i:
/// zero the U columns of dependent W_i rows, swap those rows for a
/// completion to full column rank, then move U straight to the least-squares
/// solution.
inline PathTrace property_p_path_cond1(const PatternDecomposition& d, const std::vector<Matrix>& w_blocks,
                                       const Matrix& u, const Matrix& y, std::size_t n_samples = 1000) {
    const std::size_t s = d.pattern_count();
    if (w_blocks.size() != s) throw std::invalid_argument("property_p_path_cond1: one W block per group required");
    if (u.cols() != d.total_width() || u.rows() != y.rows())
        throw std::invalid_argument("property_p_path_cond1: U has wrong shape");
    for (std::size_t i = 0; i < s; ++i) {
        if (d.width(i) < d.support_size(i))
            throw std::invalid_argument("condition violated: group " + std::to_string(i) + " has p_i < d_i");
        if (w_blocks[i].rows() != d.width(i) || w_blocks[i].cols() != d.support_size(i))
            throw std::invalid_argument("property_p_path_cond1: W block " + std::to_string(i) + " has wrong shape");
    }

    GroupedLinearParams start{u, w_blocks};
    // (a) zero U columns paired with dependent rows
    GroupedLinearParams zeroed = start;
    std::vector<std::vector<std::size_t>> dependent(s);
    for (std::size_t i = 0; i < s; ++i) {
        const Matrix ui = select_cols(u, d.groups[i]);
        ZeroPathResult z = zero_path_transform(ui, w_blocks[i]);
        for (std::size_t a = 0; a < d.groups[i].size(); ++a)
            for (std::size_t r = 0; r < u.rows(); ++r) zeroed.u(r, d.groups[i][a]) = z.u0(r, a);
        dependent[i] = z.dependent_rows;
    }
    // (b) replace dependent rows by a completion of the row space
    GroupedLinearParams completed = zeroed;
    for (std::size_t i = 0; i < s; ++i) {
        if (dependent[i].empty()) continue;
        std::vector<std::size_t> basis;
        for (std::size_t r = 0; r < w_blocks[i].rows(); ++r)
            if (std::find(dependent[i].begin(), dependent[i].end(), r) == dependent[i].end()) basis.push_back(r);
        const auto complement = detail::null_space(select_rows(w_blocks[i], basis));
        for (std::size_t j = 0; j < complement.size() && j < dependent[i].size(); ++j)
            for (std::size_t c = 0; c < complement[j].size(); ++c) completed.w[i](dependent[i][j], c) = complement[j][c];
    }
    // (c) U_i* = (Y Z^+)_i W_i^+
    GroupedLinearParams target = completed;
    const Matrix z = vstack(d.data_slices);
    const Matrix m = y * pinv(z);
    std::size_t c0 = 0;
    for (std::size_t i = 0; i < s; ++i) {
        std::vector<std::size_t> cols(d.support_size(i));
        std::iota(cols.begin(), cols.end(), c0);
        c0 += cols.size();
        const Matrix ui = select_cols(m, cols) * pinv(completed.w[i]);
        for (std::size_t a = 0; a < d.groups[i].size(); ++a)
            for (std::size_t r = 0; r < y.rows(); ++r) target.u(r, d.groups[i][a]) = ui(r, a);
    }

    const std::vector<Vector> nodes{start.flatten(), zeroed.flatten(), completed.flatten(), target.flatten()};
    PathTrace trace = sample_polyline(
        nodes, {"zero-columns", "complete-rank", "least-squares"},
        [&](std::span<const double> p) { return grouped_linear_loss(d, start.unflatten(p), y); }, n_samples);
    trace.optimum = pattern_block_optimum(d, y);
    return trace;
}

/// Scalar-output path. Each hidden unit j has its own weight row w_j on the
/// support of its group; output weights u (length p).
struct ScalarOutputParams {
    Vector u;
    std::vector<Vector> w;  // w[j] over the support of row j's group

    Vector flatten() const {
        Vector out(u);
        for (const auto& r : w) out.insert(out.end(), r.begin(), r.end());
        return out;
    }
    ScalarOutputParams unflatten(std::span<const double> p) const {
        ScalarOutputParams out = *this;
        std::size_t pos = 0;
        for (double& v : out.u) v = p[pos++];
        for (auto& r : out.w)
            for (double& v : r) v = p[pos++];
        return out;
    }
};

namespace detail {

inline std::vector<std::size_t> row_groups(const PatternDecomposition& d) {
    std::vector<std::size_t> g(d.total_width());
    for (std::size_t i = 0; i < d.pattern_count(); ++i)
        for (auto r : d.groups[i]) g[r] = i;
    return g;
}

inline Matrix scalar_output(const PatternDecomposition& d, const ScalarOutputParams& prm) {
    const auto g = row_groups(d);
    Matrix out(1, d.data_slices.front().cols());
    for (std::size_t j = 0; j < prm.u.size(); ++j) {
        const Matrix& z = d.data_slices[g[j]];
        const Vector h = transpose(z) * std::span<const double>(prm.w[j]);
        for (std::size_t c = 0; c < h.size(); ++c) out(0, c) += prm.u[j] * h[c];
    }
    return out;
}

}  // namespace detail

inline double scalar_output_loss(const PatternDecomposition& d, const ScalarOutputParams& prm, const Matrix& y) {
    return 0.5 * frobenius_norm_sq(detail::scalar_output(d, prm) - y);
}

/// Splits a first-layer weight matrix into per-row supports.
inline ScalarOutputParams scalar_output_params(const PatternDecomposition& d, const Matrix& w, const Matrix& u) {
    if (u.rows() != 1) throw std::invalid_argument("condition violated: output dimension must be 1");
    const auto g = detail::row_groups(d);
    ScalarOutputParams prm;
    prm.u = Vector(u.values());
    for (std::size_t j = 0; j < g.size(); ++j) {
        Vector r;
        for (auto c : d.supports[g[j]]) r.push_back(w(j, c));
        prm.w.push_back(std::move(r));
    }
    return prm;
}

/// For d_y = 1: units with u_j = 0 get w_j -> 0 then u_j -> 1; the remaining
/// problem is least squares in the stacked first-layer weights.
inline PathTrace property_p_path_cond3(const PatternDecomposition& d, const ScalarOutputParams& start,
                                       const Matrix& y, std::size_t n_samples = 1000) {
    if (y.rows() != 1) throw std::invalid_argument("condition violated: output dimension must be 1");
    if (start.u.size() != d.total_width() || start.w.size() != d.total_width())
        throw std::invalid_argument("property_p_path_cond3: parameter count differs from hidden width");
    const auto g = detail::row_groups(d);

    ScalarOutputParams cleared = start;
    for (std::size_t j = 0; j < start.u.size(); ++j)
        if (start.u[j] == 0.0) std::fill(cleared.w[j].begin(), cleared.w[j].end(), 0.0);
    ScalarOutputParams lifted = cleared;
    for (double& v : lifted.u)
        if (v == 0.0) v = 1.0;

    std::vector<Matrix> rows;
    for (std::size_t j = 0; j < lifted.u.size(); ++j) rows.push_back(lifted.u[j] * d.data_slices[g[j]]);
    const Matrix f = vstack(rows);
    const Matrix wstar = y * pinv(f);
    ScalarOutputParams target = lifted;
    std::size_t pos = 0;
    for (auto& r : target.w)
        for (double& v : r) v = wstar(0, pos++);

    const std::vector<Vector> nodes{start.flatten(), cleared.flatten(), lifted.flatten(), target.flatten()};
    PathTrace trace = sample_polyline(
        nodes, {"clear-dead-units", "revive-output", "least-squares"},
        [&](std::span<const double> p) { return scalar_output_loss(d, start.unflatten(p), y); }, n_samples);
    trace.optimum = 0.5 * frobenius_norm_sq(y - y * pinv(f) * f);
    return trace;
}

/// 1/2 || Y (I - X^+ X) ||^2, the best a dense linear map can do.
inline double dense_least_squares_optimum(const Matrix& x, const Matrix& y) {
    return 0.5 * frobenius_norm_sq(y - y * pinv(x) * x);
}

// ---------------------------------------------------------------------------
// Conditions

inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

/// Upper bound on dim span{sigma(w^T Z)} for data with d rows and n
/// columns: polynomial activations give the count of monomials of each
/// degree carrying a nonzero coefficient; anything else is bounded by n.
inline std::size_t intrinsic_dim_bound(const Activation& act, std::size_t d, std::size_t n) {
    std::vector<double> coeffs;
    if (act.kind() == ActivationKind::linear) coeffs = {0.0, 1.0};
    else if (act.kind() == ActivationKind::polynomial) coeffs = act.coefficients();
    else return n;
    double total = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k)
        if (coeffs[k] != 0.0) total += binomial(d + k - 1, k);
    return static_cast<std::size_t>(std::min(total, static_cast<double>(n)));
}

struct ConditionReport {
    bool cond_overparam = false;   // p_i >= d_i for every group
    bool cond_orthogonal = false;  // Z_i Z_j^T = 0 for i != j
    bool cond_scalar = false;      // d_y = 1
    bool width_vs_n = false;       // last hidden width >= n
    bool fanin_ok = false;         // every output has >= n unmasked inputs
    std::vector<std::size_t> widths;
    std::vector<std::size_t> support_sizes;
    std::vector<std::size_t> intrinsic_dims;
    bool intrinsic_ok = false;     // p_i >= intrinsic bound for every group
};

inline ConditionReport check_conditions(const SparseNet& net, const Matrix& x, const Matrix& y) {
    if (y.rows() != net.output_dim() || y.cols() != x.cols())
        throw std::invalid_argument("check_conditions: target has wrong shape");
    ConditionReport rep;
    const PatternDecomposition d = decompose_patterns(net.layer(0), x);
    const std::size_t n = x.cols();
    rep.cond_overparam = true;
    rep.intrinsic_ok = true;
    for (std::size_t i = 0; i < d.pattern_count(); ++i) {
        rep.widths.push_back(d.width(i));
        rep.support_sizes.push_back(d.support_size(i));
        rep.intrinsic_dims.push_back(intrinsic_dim_bound(net.activation(), d.support_size(i), n));
        rep.cond_overparam = rep.cond_overparam && d.width(i) >= d.support_size(i);
        rep.intrinsic_ok = rep.intrinsic_ok && d.width(i) >= rep.intrinsic_dims.back();
    }
    rep.cond_orthogonal = true;
    for (std::size_t i = 0; i < d.pattern_count(); ++i) {
        for (std::size_t j = i + 1; j < d.pattern_count(); ++j) {
            const Matrix& zi = d.data_slices[i];
            const Matrix& zj = d.data_slices[j];
            const double lhs = frobenius_norm(zi * transpose(zj));
            rep.cond_orthogonal = rep.cond_orthogonal && lhs <= 1e-10 * frobenius_norm(zi) * frobenius_norm(zj);
        }
    }
    rep.cond_scalar = net.output_dim() == 1;
    const SparseLayer& last = net.layers().back();
    rep.width_vs_n = last.in_dim() >= n;
    rep.fanin_ok = true;
    for (std::size_t r = 0; r < last.out_dim(); ++r) {
        std::size_t k = 0;
        for (auto m : last.mask().row(r)) k += m;
        rep.fanin_ok = rep.fanin_ok && k >= n;
    }
    return rep;
}

/// Numerical rank of every hidden-layer output.
inline std::vector<std::size_t> hidden_rank_certificate(const SparseNet& net, const Matrix& x, double tol = 1e-8) {
    const ForwardResult fr = forward(net, x);
    std::vector<std::size_t> ranks;
    for (const auto& h : fr.hidden_outputs) ranks.push_back(numerical_rank(h, tol));
    return ranks;
}

struct AssumptionReport {
    bool data_ok = true;  // per coordinate: nonzero, pairwise distinct magnitudes
    bool mask_ok = true;  // no all-zero mask row
    std::vector<std::string> violations;
    bool ok() const { return data_ok && mask_ok; }
};

inline AssumptionReport check_assumptions(const Matrix& x, const Mask& mask) {
    AssumptionReport rep;
    for (std::size_t k = 0; k < x.rows(); ++k) {
        std::vector<double> mags;
        for (double v : x.row(k)) mags.push_back(std::abs(v));
        std::sort(mags.begin(), mags.end());
        if (!mags.empty() && mags.front() == 0.0) {
            rep.data_ok = false;
            rep.violations.push_back("coordinate " + std::to_string(k) + " has a zero entry");
        }
        if (std::adjacent_find(mags.begin(), mags.end()) != mags.end()) {
            rep.data_ok = false;
            rep.violations.push_back("coordinate " + std::to_string(k) + " repeats a magnitude");
        }
    }
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        bool any = false;
        for (auto m : mask.row(r)) any = any || m;
        if (!any) {
            rep.mask_ok = false;
            rep.violations.push_back("mask row " + std::to_string(r) + " is fully pruned");
        }
    }
    return rep;
}

struct Admissibility {
    bool admissible = false;
    std::vector<int> orders;  // derivative orders l_1 < ... < l_n with sigma^(l)(0) != 0
};

/// Looks for n derivative orders in arithmetic progression (difference 1..4,
/// start 0..6, all orders <= 64) at which the activation's derivative at 0
/// is nonzero.
inline Admissibility activation_admissible(const Activation& act, std::size_t n) {
    Admissibility out;
    if (!act.is_analytic() || n == 0) return out;
    for (int diff = 1; diff <= 4; ++diff) {
        for (int start = 0; start <= 6; ++start) {
            const long last = start + static_cast<long>(diff) * static_cast<long>(n - 1);
            if (last > 64) continue;
            std::vector<int> orders;
            bool ok = true;
            for (std::size_t i = 0; i < n && ok; ++i) {
                const int l = start + diff * static_cast<int>(i);
                const auto v = act.taylor_at_zero(l);
                ok = v && std::abs(*v) > 1e-12;
                orders.push_back(l);
            }
            if (ok) {
                out.admissible = true;
                out.orders = std::move(orders);
                return out;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Polynomial activations as inner products of feature maps:
//   sigma(w^T x + b) = <psi(w, b), phi(x)>, indexed by exponents |beta| <= t.

class PolyFeatureMaps {
public:
    PolyFeatureMaps(std::vector<double> coeffs, std::size_t d) : coeffs_(std::move(coeffs)), d_(d) {
        if (coeffs_.empty()) throw std::invalid_argument("PolyFeatureMaps: no coefficients");
        const int t = static_cast<int>(coeffs_.size()) - 1;
        std::vector<int> beta(d_, 0);
        enumerate(beta, 0, t);
        std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
            return std::accumulate(a.begin(), a.end(), 0) > std::accumulate(b.begin(), b.end(), 0);
        });
        for (std::size_t i = 0; i < exponents_.size(); ++i) index_[exponents_[i]] = i;
    }

    std::size_t feature_dim() const noexcept { return exponents_.size(); }
    int degree() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
    const std::vector<std::vector<int>>& exponents() const noexcept { return exponents_; }
    std::size_t index_of(const std::vector<int>& beta) const { return index_.at(beta); }

    Vector phi(std::span<const double> x) const {
        check(x.size());
        Vector out(feature_dim());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = monomial(exponents_[i], x);
        return out;
    }

    Vector psi(std::span<const double> w, double b) const {
        check(w.size());
        Vector out(feature_dim());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& beta = exponents_[i];
            const int m = std::accumulate(beta.begin(), beta.end(), 0);
            double beta_fact = 1.0;
            for (int e : beta) beta_fact *= detail::factorial(e);
            double acc = 0.0;
            for (int k = m; k <= degree(); ++k) {
                if (coeffs_[k] == 0.0) continue;
                const double multinom = detail::factorial(k) / (beta_fact * detail::factorial(k - m));
                acc += coeffs_[k] * multinom * std::pow(b, k - m);
            }
            out[i] = acc * monomial(beta, w);
        }
        return out;
    }

    double activation(double z) const {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
        return acc;
    }

private:
    void enumerate(std::vector<int>& beta, std::size_t pos, int remaining) {
        if (pos == d_) {
            exponents_.push_back(beta);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            beta[pos] = e;
            enumerate(beta, pos + 1, remaining - e);
        }
        beta[pos] = 0;
    }
    static double monomial(const std::vector<int>& beta, std::span<const double> x) {
        double v = 1.0;
        for (std::size_t k = 0; k < beta.size(); ++k)
            for (int e = 0; e < beta[k]; ++e) v *= x[k];
        return v;
    }
    void check(std::size_t n) const {
        if (n != d_) throw std::invalid_argument("PolyFeatureMaps: expected " + std::to_string(d_) + " coordinates");
    }

    std::vector<double> coeffs_;
    std::size_t d_;
    std::vector<std::vector<int>> exponents_;
    std::map<std::vector<int>, std::size_t> index_;
};

inline PolyFeatureMaps poly_feature_maps(std::vector<double> coeffs, std::size_t d) {
    return PolyFeatureMaps(std::move(coeffs), d);
}

// ---------------------------------------------------------------------------
// Seeded random instances

/// Two-layer linear problem with a sparse first layer. `u` is d_y x p.
struct PathInstance {
    int condition = 1;
    SparseLayer layer;
    Matrix u;
    Matrix x;
    Matrix y;
};

/// Condition 1: groups with p_i = d_i + r (r in {0, 1, 2}) and W_i of random
/// rank <= d_i. Condition 3: d_y = 1, free group widths, about a third of
/// the output weights zero. Supports always cover every input coordinate.
inline PathInstance random_path_instance(int condition, std::uint64_t seed) {
    if (condition != 1 && condition != 3) throw std::invalid_argument("random_path_instance: condition must be 1 or 3");
    Rng rng(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1)); };
    PathInstance inst;
    inst.condition = condition;
    const std::size_t dx = pick(2, 6);
    const std::size_t n = pick(dx + 1, dx + 6);
    const std::size_t dy = condition == 3 ? 1 : pick(1, 3);
    const std::size_t s = pick(1, std::min<std::size_t>(3, dx));

    std::vector<std::vector<std::uint8_t>> patterns;
    while (patterns.size() < s) {
        std::vector<std::uint8_t> pat(dx, 0);
        for (auto& v : pat) v = rng.bernoulli(0.5);
        if (std::find(pat.begin(), pat.end(), 1) == pat.end()) continue;
        if (std::find(patterns.begin(), patterns.end(), pat) != patterns.end()) continue;
        patterns.push_back(std::move(pat));
    }
    for (std::size_t c = 0; c < dx; ++c) {
        bool covered = false;
        for (const auto& pat : patterns) covered = covered || pat[c];
        if (covered) continue;
        auto& pat = patterns[pick(0, s - 1)];
        pat[c] = 1;
    }
    // merging above may have made two patterns equal; decomposition regroups them

    std::vector<Vector> rows;
    std::vector<std::vector<std::uint8_t>> mask_rows;
    for (const auto& pat : patterns) {
        std::vector<std::size_t> sup;
        for (std::size_t c = 0; c < dx; ++c)
            if (pat[c]) sup.push_back(c);
        const std::size_t di = sup.size();
        const std::size_t pi = condition == 1 ? di + pick(0, 2) : pick(1, 3);
        const std::size_t k = pick(1, di);
        const Matrix w = rng.normal_matrix(pi, k) * rng.normal_matrix(k, di);
        for (std::size_t r = 0; r < pi; ++r) {
            Vector full(dx, 0.0);
            for (std::size_t a = 0; a < di; ++a) full[sup[a]] = w(r, a);
            rows.push_back(std::move(full));
            mask_rows.push_back(pat);
        }
    }
    Matrix w(rows.size(), dx);
    Mask m(rows.size(), dx);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < dx; ++c) w(r, c) = rows[r][c], m(r, c) = mask_rows[r][c];
    inst.layer = SparseLayer(std::move(w), std::move(m));
    inst.u = rng.normal_matrix(dy, rows.size());
    if (condition == 3)
        for (double& v : inst.u.values())
            if (rng.bernoulli(1.0 / 3.0)) v = 0.0;
    inst.x = rng.normal_matrix(dx, n);
    inst.y = rng.normal_matrix(dy, n);
    return inst;
}

/// Runs the descent-path builder matching the instance's condition.
inline PathTrace property_p_path(const PathInstance& inst, std::size_t n_samples = 1000) {
    const PatternDecomposition d = decompose_patterns(inst.layer, inst.x);
    if (inst.condition == 1) return property_p_path_cond1(d, group_weights(inst.layer, d), inst.u, inst.y, n_samples);
    return property_p_path_cond3(d, scalar_output_params(d, inst.layer.weights(), inst.u), inst.y, n_samples);
}

/// Square hidden layer (d_x = p = n) with Gaussian data and weights and a
/// Bernoulli(keep) mask; rows the mask empties get one random entry back.
struct RankInstance {
    SparseNet net;
    Matrix x;
};

inline RankInstance random_rank_instance(const Activation& act, std::size_t n, std::uint64_t seed, double keep = 0.5) {
    if (n == 0) throw std::invalid_argument("random_rank_instance: n must be positive");
    Rng rng(seed);
    Mask m(n, n);
    for (auto& v : m.values()) v = rng.bernoulli(keep);
    for (std::size_t r = 0; r < n; ++r) {
        bool any = false;
        for (auto v : m.row(r)) any = any || v;
        if (!any) m(r, static_cast<std::size_t>(rng.next() % n)) = 1;
    }
    Matrix w = rng.normal_matrix(n, n);
    Matrix x = rng.normal_matrix(n, n);
    Matrix u = rng.normal_matrix(1, n);
    std::vector<SparseLayer> layers{SparseLayer::masked(std::move(w), std::move(m)), SparseLayer::dense(std::move(u))};
    return {SparseNet(std::move(layers), act), std::move(x)};
}

}  // namespace sparseland
