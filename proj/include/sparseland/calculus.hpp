#pragma once

// Derivatives of the squared loss. Closed forms for two-layer linear
// networks written group by group, central finite differences for
// everything else, and a probe-based classifier for stationary points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparseland/linalg.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/rng.hpp"

namespace sparseland {

struct LinearGroup {
    Matrix u;  // d_y x p_i
    Matrix w;  // p_i x d_i
    Matrix z;  // d_i x n
};

/// L = 1/2 || sum_i U_i W_i Z_i - Y ||_F^2
struct TwoLayerLinearInstance {
    std::vector<LinearGroup> groups;
    Matrix y;

    void validate() const {
        if (groups.empty()) throw std::invalid_argument("TwoLayerLinearInstance: no groups");
        for (std::size_t i = 0; i < groups.size(); ++i) {
            const auto& g = groups[i];
            const std::string tag = "TwoLayerLinearInstance: group " + std::to_string(i);
            if (g.u.rows() != y.rows()) throw std::invalid_argument(tag + ": U has wrong row count");
            if (g.u.cols() != g.w.rows()) throw std::invalid_argument(tag + ": U and W widths differ");
            if (g.w.cols() != g.z.rows()) throw std::invalid_argument(tag + ": W and Z dimensions differ");
            if (g.z.cols() != y.cols()) throw std::invalid_argument(tag + ": Z has wrong sample count");
        }
    }

    Matrix output() const {
        validate();
        Matrix out(y.rows(), y.cols());
        for (const auto& g : groups) out = out + g.u * (g.w * g.z);
        return out;
    }
    Matrix residual() const { return output() - y; }
    double loss() const { return 0.5 * frobenius_norm_sq(residual()); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& g : groups) n += g.u.size() + g.w.size();
        return n;
    }

    /// Flat layout: per group, U row-major then W row-major.
    Vector parameters() const {
        Vector out;
        out.reserve(parameter_count());
        for (const auto& g : groups) {
            out.insert(out.end(), g.u.values().begin(), g.u.values().end());
            out.insert(out.end(), g.w.values().begin(), g.w.values().end());
        }
        return out;
    }

    TwoLayerLinearInstance with_parameters(std::span<const double> p) const {
        if (p.size() != parameter_count()) throw std::invalid_argument("TwoLayerLinearInstance: wrong parameter count");
        TwoLayerLinearInstance out = *this;
        std::size_t pos = 0;
        for (auto& g : out.groups) {
            for (double& v : g.u.values()) v = p[pos++];
            for (double& v : g.w.values()) v = p[pos++];
        }
        return out;
    }
};

struct GroupGradient {
    Matrix du;
    Matrix dw;
};

inline std::vector<GroupGradient> grad_two_layer_linear(const TwoLayerLinearInstance& inst) {
    const Matrix r = inst.residual();
    std::vector<GroupGradient> out;
    out.reserve(inst.groups.size());
    for (const auto& g : inst.groups) {
        const Matrix rzt = r * transpose(g.z);
        out.push_back({rzt * transpose(g.w), transpose(g.u) * rzt});
    }
    return out;
}

inline Vector flatten(const std::vector<GroupGradient>& grads) {
    Vector out;
    for (const auto& g : grads) {
        out.insert(out.end(), g.du.values().begin(), g.du.values().end());
        out.insert(out.end(), g.dw.values().begin(), g.dw.values().end());
    }
    return out;
}

/// Closed-form Hessian when every group has a single hidden unit (U_i is a
/// column u_i, W_i a row w_i^T). Variables ordered (u_1, w_1, u_2, w_2, ...).
inline Matrix hessian_two_layer_linear(const TwoLayerLinearInstance& inst) {
    inst.validate();
    for (const auto& g : inst.groups) {
        if (g.u.cols() != 1 || g.w.rows() != 1) {
            throw std::invalid_argument(
                "hessian_two_layer_linear: only single-unit groups are supported; use hessian_fd");
        }
    }
    const std::size_t s = inst.groups.size();
    const std::size_t dy = inst.y.rows();
    const Matrix r = inst.residual();

    std::vector<std::size_t> offset(s);
    std::size_t total = 0;
    for (std::size_t i = 0; i < s; ++i) {
        offset[i] = total;
        total += dy + inst.groups[i].w.cols();
    }
    std::vector<Vector> u(s), w(s);
    for (std::size_t i = 0; i < s; ++i) {
        u[i] = column(inst.groups[i].u, 0);
        w[i] = Vector(inst.groups[i].w.values());
    }
    // zz[i][j] = Z_i Z_j^T
    std::vector<std::vector<Matrix>> zz(s, std::vector<Matrix>(s));
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < s; ++j) zz[i][j] = inst.groups[i].z * transpose(inst.groups[j].z);

    Matrix h(total, total);
    auto put = [&](std::size_t r0, std::size_t c0, const Matrix& block) {
        for (std::size_t a = 0; a < block.rows(); ++a)
            for (std::size_t b = 0; b < block.cols(); ++b) h(r0 + a, c0 + b) = block(a, b);
    };
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t ui = offset[i];
        const std::size_t wi = offset[i] + dy;
        for (std::size_t j = 0; j < s; ++j) {
            const std::size_t uj = offset[j];
            const std::size_t wj = offset[j] + dy;
            // d/du_j of R a_i, a_i = Z_i^T w_i
            const double aij = dot(w[j], zz[j][i] * std::span<const double>(w[i]));
            put(ui, uj, aij * Matrix::identity(dy));
            // d/dw_j of R a_i
            Matrix uw = outer(u[j], zz[j][i] * std::span<const double>(w[i]));
            if (i == j) uw = uw + r * transpose(inst.groups[i].z);
            put(ui, wj, uw);
            // d/dw_j of Z_i R^T u_i
            put(wi, wj, dot(u[i], u[j]) * zz[i][j]);
            Matrix wu = outer(zz[i][j] * std::span<const double>(w[j]), u[i]);
            if (i == j) wu = wu + inst.groups[i].z * transpose(r);
            put(wi, uj, wu);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Finite differences

using ScalarFn = std::function<double(std::span<const double>)>;

inline Vector grad_fd(const ScalarFn& f, std::span<const double> x, double h = 1e-5) {
    if (!(h > 0.0)) throw std::invalid_argument("grad_fd: step must be positive");
    Vector p(x.begin(), x.end());
    Vector g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double xi = p[i];
        p[i] = xi + h;
        const double fp = f(p);
        p[i] = xi - h;
        const double fm = f(p);
        p[i] = xi;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline Matrix hessian_fd(const ScalarFn& f, std::span<const double> x, double h = 1e-4) {
    if (!(h > 0.0)) throw std::invalid_argument("hessian_fd: step must be positive");
    Vector p(x.begin(), x.end());
    const std::size_t n = p.size();
    Matrix out(n, n);
    auto eval = [&](std::size_t i, double si, std::size_t j, double sj) {
        const double xi = p[i];
        const double xj = p[j];
        p[i] += si * h;
        p[j] += sj * h;
        const double v = f(p);
        p[i] = xi;
        p[j] = xj;
        return v;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = (eval(i, 1, j, 1) - eval(i, 1, j, -1) - eval(i, -1, j, 1) + eval(i, -1, j, -1)) /
                             (4.0 * h * h);
            out(i, j) = out(j, i) = v;
        }
    }
    return out;
}

/// Central differences of the network loss over unmasked coordinates; masked
/// coordinates are reported as 0.
inline NetGradient grad_fd(const SparseNet& net, const Matrix& x, const Matrix& y, double h = 1e-5) {
    const Vector params = flatten_parameters(net);
    const Vector g = grad_fd([&](std::span<const double> p) { return loss(with_parameters(net, p), x, y); },
                             params, h);
    NetGradient out;
    std::size_t pos = 0;
    for (const auto& l : net.layers()) {
        Matrix gw(l.out_dim(), l.in_dim());
        for (std::size_t i = 0; i < gw.size(); ++i)
            if (l.mask().values()[i]) gw.values()[i] = g[pos++];
        Vector gb;
        if (l.bias()) {
            gb.assign(l.out_dim(), 0.0);
            for (std::size_t r = 0; r < l.out_dim(); ++r)
                if (l.has_bias(r)) gb[r] = g[pos++];
        }
        out.weights.push_back(std::move(gw));
        out.biases.push_back(std::move(gb));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stationary points

enum class MinVerdict { strict_local_min, local_min_nonstrict, saddle, inconclusive };

inline const char* to_string(MinVerdict v) {
    switch (v) {
        case MinVerdict::strict_local_min: return "strict_local_min";
        case MinVerdict::local_min_nonstrict: return "local_min_nonstrict";
        case MinVerdict::saddle: return "saddle";
        case MinVerdict::inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

struct StationaryReport {
    double grad_norm = 0.0;
    Vector eigenvalues;           // ascending
    std::vector<Vector> null_basis;
    MinVerdict verdict = MinVerdict::inconclusive;
    double probe_evidence = 0.0;  // smallest loss change seen over all probes
    std::size_t probes_run = 0;
};

struct ClassifyOptions {
    double null_tol = 1e-6;       // relative to max |eigenvalue|
    double probe_radius = 1e-2;
    std::size_t n_probes = 500;
    std::uint64_t seed = 0;
    double grad_tol = 1e-8;
    double decrease_tol = 1e-12;
    std::function<Vector(std::span<const double>)> gradient;  // defaults to grad_fd
    std::function<Matrix(std::span<const double>)> hessian;   // defaults to hessian_fd
};

/// Gradient and Hessian spectrum at `point`, then loss probes along random
/// unit directions at radius r and r/10. Every other probe is drawn inside
/// the Hessian null space, where second-order information says nothing.
inline StationaryReport classify_stationary(const ScalarFn& f, std::span<const double> point,
                                            const ClassifyOptions& opt = {}) {
    StationaryReport rep;
    const Vector g = opt.gradient ? opt.gradient(point) : grad_fd(f, point);
    rep.grad_norm = norm(g);
    const Matrix h = opt.hessian ? opt.hessian(point) : hessian_fd(f, point);
    const SymEigResult eig = sym_eig(h, 1e-8 * std::max(1.0, max_abs(h)));
    rep.eigenvalues = eig.values;

    double scale = 0.0;
    for (double v : eig.values) scale = std::max(scale, std::abs(v));
    const double cutoff = opt.null_tol * scale;
    for (std::size_t k = 0; k < eig.values.size(); ++k)
        if (std::abs(eig.values[k]) <= cutoff) rep.null_basis.push_back(column(eig.vectors, k));

    const double f0 = f(point);
    Rng rng(opt.seed);
    Vector trial(point.size());
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opt.n_probes; ++k) {
        Vector dir;
        if (k % 2 == 1 && !rep.null_basis.empty()) {
            dir.assign(point.size(), 0.0);
            const Vector c = rng.unit_vector(rep.null_basis.size());
            for (std::size_t b = 0; b < c.size(); ++b)
                for (std::size_t i = 0; i < dir.size(); ++i) dir[i] += c[b] * rep.null_basis[b][i];
        } else {
            dir = rng.unit_vector(point.size());
        }
        for (double radius : {opt.probe_radius, opt.probe_radius / 10.0}) {
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = point[i] + radius * dir[i];
            worst = std::min(worst, f(trial) - f0);
            ++rep.probes_run;
        }
    }
    rep.probe_evidence = rep.probes_run ? worst : 0.0;

    const double min_eig = eig.values.empty() ? 0.0 : eig.values.front();
    if (rep.grad_norm > opt.grad_tol) {
        rep.verdict = MinVerdict::inconclusive;
    } else if (min_eig < -cutoff) {
        rep.verdict = MinVerdict::saddle;
    } else if (rep.probes_run > 0 && worst > 0.0) {
        rep.verdict = MinVerdict::strict_local_min;
    } else if (rep.probes_run > 0 && worst >= -opt.decrease_tol) {
        rep.verdict = MinVerdict::local_min_nonstrict;
    } else {
        rep.verdict = MinVerdict::inconclusive;
    }
    return rep;
}

}  // namespace sparseland
