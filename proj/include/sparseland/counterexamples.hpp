#pragma once

// Explicit instances with bad landscapes: a strict non-global minimum of a
// sparse-dense linear net, a valley of a sparse-sparse net, and a valley of
// a single-channel SAME convolution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparseland/activation.hpp"
#include "sparseland/calculus.hpp"
#include "sparseland/conv_modes.hpp"
#include "sparseland/linalg.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/rng.hpp"

namespace sparseland {

// ---------------------------------------------------------------------------
// Sparse-dense linear net with a strict local minimum above the global one.

struct SDMinimumInstance {
    Matrix z1, z2, y;
    Vector theta;         // (u1, w1, u2, w2)
    Vector better_theta;  // a point with lower loss
    double reference_loss = 221.0 / 360.0;
    double better_loss_bound = 0.572;
    Vector reference_eigenvalues{0.0, 0.0, 0.0997, 1.2886, 1.8647, 5.2568, 7.1369, 12.3533};

    TwoLayerLinearInstance at(std::span<const double> t) const {
        if (t.size() != 8) throw std::invalid_argument("SDMinimumInstance: expected 8 parameters");
        TwoLayerLinearInstance inst;
        inst.y = y;
        inst.groups.push_back({Matrix{{t[0]}, {t[1]}}, Matrix{{t[2], t[3]}}, z1});
        inst.groups.push_back({Matrix{{t[4]}, {t[5]}}, Matrix{{t[6], t[7]}}, z2});
        return inst;
    }
    double loss(std::span<const double> t) const { return at(t).loss(); }

    /// Same objective as a masked two-layer network on X = [Z1; Z2].
    SparseNet network(std::span<const double> t) const {
        const Matrix w{{t[2], t[3], 0.0, 0.0}, {0.0, 0.0, t[6], t[7]}};
        const Mask m{{1, 1, 0, 0}, {0, 0, 1, 1}};
        const Matrix u{{t[0], t[4]}, {t[1], t[5]}};
        return SparseNet({SparseLayer(w, m), SparseLayer::dense(u)}, Activation::linear());
    }
    Matrix stacked_data() const {
        const std::array<Matrix, 2> blocks{z1, z2};
        return vstack(blocks);
    }
};

inline SDMinimumInstance build_sd_minimum() {
    SDMinimumInstance inst;
    const double a = std::sqrt(0.9), b = std::sqrt(0.1), c = std::sqrt(0.8), e = std::sqrt(0.2);
    inst.z1 = Matrix{{a, 0, b, 0}, {0, c, 0, e}};
    inst.z2 = Matrix{{b, 0, a, 0}, {0, e, 0, c}};
    const Matrix a1{{7.0 / 8.0, 7.0 / 9.0}, {3.0 / 4.0, 5.0 / 3.0}};
    const Matrix a2{{15.0 / 8.0, 16.0 / 9.0}, {7.0 / 4.0, 11.0 / 3.0}};
    inst.y = a1 * inst.z1 + a2 * inst.z2;
    inst.theta = {1, 1, 1, 1, 1, 2, 1, 2};
    inst.better_theta = {0.25, 1, 0.65, 2.2, 0.8, 1, 2.2, 2.9};

    // Self-check against the known residual products and loss value.
    const Matrix r = inst.at(inst.theta).residual();
    const Matrix r1 = r * transpose(inst.z1);
    const Matrix r2 = r * transpose(inst.z2);
    const Matrix e1{{-0.4, 0.4}, {0.4, -0.4}};
    const Matrix e2{{-0.8, 0.4}, {0.4, -0.2}};
    const double l = inst.loss(inst.theta);
    const double err = std::max({max_abs(r1 - e1), max_abs(r2 - e2), std::abs(l - inst.reference_loss),
                                 max_abs(inst.z1 * transpose(inst.z1) - Matrix::identity(2)),
                                 max_abs(inst.z2 * transpose(inst.z2) - Matrix::identity(2)),
                                 max_abs(inst.z1 * transpose(inst.z2) - Matrix{{0.6, 0}, {0, 0.8}})});
    if (err > 1e-12) {
        std::ostringstream os;
        os.precision(17);
        os << "build_sd_minimum: instance failed validation (max error " << err << ", loss " << l << ")";
        throw std::runtime_error(os.str());
    }
    return inst;
}

struct SDVerification {
    StationaryReport report;
    Matrix hessian;
    double loss = 0.0;
    double better_loss = 0.0;
    bool grad_zero = false;
    bool hessian_psd = false;
    bool eigs_match = false;
    bool strict_probe_pass = false;
    bool better_point_exists = false;

    bool all() const { return grad_zero && hessian_psd && eigs_match && strict_probe_pass && better_point_exists; }
};

inline SDVerification verify_sd_minimum(const SDMinimumInstance& inst, std::size_t n_probes = 500,
                                        double probe_radius = 1e-2, std::uint64_t seed = 0) {
    SDVerification v;
    ClassifyOptions opt;
    opt.n_probes = n_probes;
    opt.probe_radius = probe_radius;
    opt.seed = seed;
    opt.gradient = [&](std::span<const double> t) { return flatten(grad_two_layer_linear(inst.at(t))); };
    opt.hessian = [&](std::span<const double> t) { return hessian_two_layer_linear(inst.at(t)); };
    v.report = classify_stationary([&](std::span<const double> t) { return inst.loss(t); }, inst.theta, opt);
    v.hessian = hessian_two_layer_linear(inst.at(inst.theta));
    v.loss = inst.loss(inst.theta);
    v.better_loss = inst.loss(inst.better_theta);

    const auto& ev = v.report.eigenvalues;
    const double top = ev.empty() ? 0.0 : std::max(std::abs(ev.front()), std::abs(ev.back()));
    v.grad_zero = v.report.grad_norm < 1e-10;
    v.hessian_psd = !ev.empty() && ev.front() >= -1e-10 * std::max(1.0, top);
    v.eigs_match = ev.size() == inst.reference_eigenvalues.size();
    for (std::size_t k = 0; v.eigs_match && k < ev.size(); ++k)
        v.eigs_match = std::abs(ev[k] - inst.reference_eigenvalues[k]) <= 1e-3;
    v.strict_probe_pass = v.report.verdict == MinVerdict::strict_local_min;
    v.better_point_exists = v.better_loss < v.loss && v.better_loss < inst.better_loss_bound;
    return v;
}

// ---------------------------------------------------------------------------
// Sparse-sparse net with a valley. Parameters theta = (w1, ..., w8):
//   output layer [[w1, 0], [w2, w3], [0, w4]], hidden layer [[w5, w6, 0], [0, w7, w8]],
//   X = I_3. The objective here is the plain squared norm (no 1/2).

struct SSValleyInstance {
    double y1 = 0, y2 = 0, y3 = 0, y4 = 0;
    Activation activation;
    Matrix x;  // I_3
    Matrix y;  // 3 x 3
    std::vector<std::string> constraint_violations;
    Vector valley_point;
    Vector escape_point;
    double scale = 0.0;  // sigma value used for the valley point (1/a)

    double valley_level() const { return y4 * y4; }
    double escape_level() const {
        const double r = y3 / (y2 + y3);
        return y1 * y1 * r * r;
    }
    bool constraints_met() const { return constraint_violations.empty(); }
};

inline SparseNet ss_network(const Activation& act, std::span<const double> t) {
    if (t.size() != 8) throw std::invalid_argument("ss_network: expected 8 parameters");
    const Matrix hidden{{t[4], t[5], 0.0}, {0.0, t[6], t[7]}};
    const Mask hidden_mask{{1, 1, 0}, {0, 1, 1}};
    const Matrix out{{t[0], 0.0}, {t[1], t[2]}, {0.0, t[3]}};
    const Mask out_mask{{1, 0}, {1, 1}, {0, 1}};
    return SparseNet({SparseLayer(hidden, hidden_mask), SparseLayer(out, out_mask)}, act);
}

/// Inverse of ss_network's layout.
inline Vector ss_theta(const SparseNet& net) {
    const Matrix& h = net.layer(0).weights();
    const Matrix& o = net.layer(1).weights();
    return {o(0, 0), o(1, 0), o(1, 1), o(2, 1), h(0, 0), h(0, 1), h(1, 1), h(1, 2)};
}

inline double ss_loss(const SSValleyInstance& inst, std::span<const double> t) {
    return frobenius_norm_sq(residual(ss_network(inst.activation, t), inst.x, inst.y));
}

namespace detail {

// Some z with sigma(z) == target, by bisection between z = 0 (sigma = 0) and
// a point `hi` where sigma reaches the target. Bisection stops at adjacent
// doubles; the upper one is an exact hit whenever one exists.
inline double sigma_preimage(const Activation& act, double target, double hi) {
    double lo = 0.0;
    const double sign_target = target > 0 ? 1.0 : -1.0;
    auto below = [&](double z) { return sign_target * (act(z) - target) < 0.0; };
    for (int i = 0; i < 200 && lo != hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (below(mid)) lo = mid;
        else hi = mid;
    }
    if (act(hi) == target) return hi;
    return std::abs(act(lo) - target) <= std::abs(act(hi) - target) ? lo : hi;
}

// Finds a bracket [0, z] with sigma(z) beyond target; nullopt if target is
// out of reach within |z| <= 64.
inline std::optional<double> sigma_bracket(const Activation& act, double target) {
    for (double dir : {1.0, -1.0}) {
        for (double z = 0.125; z <= 64.0; z *= 2.0) {
            const double v = act(dir * z);
            if ((target > 0 && v >= target) || (target < 0 && v <= target)) return dir * z;
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Builds the instance plus a valley point (w4 = 0, rows 1-2 fitted exactly,
/// loss y4^2) and an escape point (loss y1^2 (y3/(y2+y3))^2).
inline SSValleyInstance build_ss_valley(double y1, double y2, double y3, double y4, const Activation& act) {
    SSValleyInstance inst;
    inst.y1 = y1, inst.y2 = y2, inst.y3 = y3, inst.y4 = y4;
    inst.activation = act;
    if (act(0.0) != 0.0) throw std::invalid_argument("build_ss_valley: activation must vanish at 0");
    if (!(y3 > 4 * y4)) inst.constraint_violations.push_back("y3 > 4*y4");
    if (!(y4 > y1)) inst.constraint_violations.push_back("y4 > y1");
    if (!(y1 > 0)) inst.constraint_violations.push_back("y1 > 0");
    if (!(y2 > 0)) inst.constraint_violations.push_back("y2 > 0");
    inst.x = Matrix::identity(3);
    inst.y = Matrix{{y1, y1, 0.0}, {y2, y2 + y3, 0.0}, {0.0, 0.0, y4}};

    // Powers of two keep a = 1/s exact, so rows 1-2 are fitted without rounding.
    std::optional<double> z0;
    double s = 0.0;
    for (double target : {1.0, 0.5, 0.25, -1.0, -0.5, -0.25}) {
        auto hi = detail::sigma_bracket(act, target);
        if (!hi) continue;
        const double z = detail::sigma_preimage(act, target, *hi);
        if (std::abs(act.derivative(z)) < 1e-3) continue;  // saturated
        if (act(z) == target) {
            z0 = z;
            s = target;
            break;
        }
        if (!z0) {
            z0 = z;
            s = act(z);
        }
    }
    if (!z0 || s == 0.0) throw std::runtime_error("build_ss_valley: activation range gives no valley point");
    inst.scale = s;
    const double a = 1.0 / s;
    const double z = *z0;
    inst.valley_point = {y1 * a, y2 * a, y3 * a, 0.0, z, z, z, 0.0};

    const double target5 = s * y2 / (y2 + y3);
    const double z5 = detail::sigma_preimage(act, target5, z);
    inst.escape_point = {y1 * a, (y2 + y3) * a, 0.0, y4 * a, z5, z, 0.0, z};
    return inst;
}

struct SSProbeReport {
    std::size_t probes = 0;
    std::size_t falsifications = 0;      // loss below the valley level
    std::size_t strictness_failures = 0; // delta4 != 0 but loss not above the level
    std::size_t strict_checks = 0;
    double min_delta = std::numeric_limits<double>::infinity();

    bool passed() const { return falsifications == 0 && strictness_failures == 0; }
};

/// Random perturbations of the valley point inside the box of the local
/// argument: |d3| <= |w3|/2 and d7 small enough that sigma(w7 + d7) stays
/// within half of sigma(w7).
inline SSProbeReport probe_ss_valley(const SSValleyInstance& inst, std::size_t n_perturb, double radius,
                                     std::uint64_t seed, double tol = 1e-10) {
    SSProbeReport rep;
    Rng rng(seed);
    const Vector& p = inst.valley_point;
    const double level = inst.valley_level();
    const double s7 = inst.activation(p[6]);
    Vector q(8);
    for (std::size_t k = 0; k < n_perturb; ++k) {
        Vector d(8);
        for (double& v : d) v = rng.uniform(-radius, radius);
        d[2] = std::clamp(d[2], -std::abs(p[2]) / 2, std::abs(p[2]) / 2);
        while (std::abs(inst.activation(p[6] + d[6]) - s7) > std::abs(s7) / 2) d[6] *= 0.5;
        for (std::size_t i = 0; i < 8; ++i) q[i] = p[i] + d[i];
        const double delta = ss_loss(inst, q) - level;
        ++rep.probes;
        rep.min_delta = std::min(rep.min_delta, delta);
        if (delta < -tol) ++rep.falsifications;
        if (std::abs(d[3]) > 1e-5) {
            ++rep.strict_checks;
            if (!(delta > 0.0)) ++rep.strictness_failures;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Single-channel SAME convolution, kernel size 2 on length-2 inputs:
//   L(U, w) = 1/2 || U f_S(w) I_2 - diag(1, 4) ||_F^2.

struct CNNSameValley {
    Matrix x = Matrix::identity(2);
    Matrix y{{1.0, 0.0}, {0.0, 4.0}};

    double loss(const Matrix& u, const Vector& w) const {
        const Matrix f = conv_matrix({w, 2, ConvMode::same});
        return 0.5 * frobenius_norm_sq(u * f * x - y);
    }
    /// A point of the valley {w1 = u1 = 0, w2 = a, u3 = 4/a}; u2 and u4 are free.
    std::pair<Matrix, Vector> valley_point(double a, double u2 = 0.0, double u4 = 0.0) const {
        if (!(a > 0)) throw std::invalid_argument("CNNSameValley: a must be positive");
        return {Matrix{{0.0, u2}, {4.0 / a, u4}}, Vector{0.0, a}};
    }
    std::pair<Matrix, Vector> global_witness() const { return {y, Vector{1.0, 0.0}}; }
    double valley_level() const { return 0.5; }
};

inline CNNSameValley build_cnn_same_valley() { return {}; }

struct CNNProbeReport {
    std::size_t probes = 0;
    std::size_t falsifications = 0;
    double min_loss = std::numeric_limits<double>::infinity();
    bool passed() const { return falsifications == 0; }
};

/// Perturbations within |eps3| <= 0.5/a, |u2|, |eps2| <= 0.25/a,
/// |delta2| <= 0.1a, |delta1|, |eps1| < 1; u4 and eps4 unconstrained (drawn
/// from [-1, 1]).
inline CNNProbeReport probe_cnn_same_valley(const CNNSameValley& inst, double a, std::size_t n, std::uint64_t seed,
                                            double tol = 1e-12) {
    CNNProbeReport rep;
    Rng rng(seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double u2 = rng.uniform(-0.25 / a, 0.25 / a);
        const double u4 = rng.uniform(-1.0, 1.0);
        auto [u, w] = inst.valley_point(a, u2, u4);
        u(0, 0) += rng.uniform(-1.0, 1.0);
        u(0, 1) += rng.uniform(-0.25 / a, 0.25 / a);
        u(1, 0) += rng.uniform(-0.5 / a, 0.5 / a);
        u(1, 1) += rng.uniform(-1.0, 1.0);
        w[0] += rng.uniform(-1.0, 1.0);
        w[1] += rng.uniform(-0.1 * a, 0.1 * a);
        const double l = inst.loss(u, w);
        ++rep.probes;
        rep.min_loss = std::min(rep.min_loss, l);
        if (l < inst.valley_level() - tol) ++rep.falsifications;
    }
    return rep;
}

}  // namespace sparseland
