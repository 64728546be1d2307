#include <gtest/gtest.h>

#include "sparseland/calculus.hpp"
#include "sparseland/rng.hpp"
#include "support.hpp"

using namespace sparseland;

namespace {

TwoLayerLinearInstance random_instance(Rng& rng, std::size_t s, std::size_t dy, std::size_t p, std::size_t n) {
    TwoLayerLinearInstance inst;
    inst.y = rng.normal_matrix(dy, n);
    for (std::size_t i = 0; i < s; ++i) {
        const std::size_t di = 1 + rng.next() % 3;
        inst.groups.push_back({rng.normal_matrix(dy, p), rng.normal_matrix(p, di), rng.normal_matrix(di, n)});
    }
    return inst;
}

double rel_err(const Vector& a, const Vector& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) num += (a[i] - b[i]) * (a[i] - b[i]), den += b[i] * b[i];
    return std::sqrt(num / std::max(den, 1e-300));
}

}  // namespace

TEST(TwoLayerLinear, LossMatchesDirectSum) {
    Rng rng(21);
    const auto inst = random_instance(rng, 3, 2, 2, 5);
    Eigen::MatrixXd out = -oracle::to_eigen(inst.y);
    for (const auto& g : inst.groups) out += oracle::to_eigen(g.u) * oracle::to_eigen(g.w) * oracle::to_eigen(g.z);
    EXPECT_NEAR(inst.loss(), 0.5 * out.squaredNorm(), 1e-12);
    EXPECT_EQ(inst.with_parameters(inst.parameters()).parameters(), inst.parameters());
}

TEST(TwoLayerLinear, GradientMatchesFiniteDifferences) {
    Rng rng(22);
    for (int t = 0; t < 30; ++t) {
        const auto inst = random_instance(rng, 1 + t % 3, 1 + t % 2, 1 + t % 3, 4);
        const Vector g = flatten(grad_two_layer_linear(inst));
        const Vector fd = grad_fd([&](std::span<const double> p) { return inst.with_parameters(p).loss(); },
                                  inst.parameters());
        EXPECT_LT(rel_err(g, fd), 1e-6);
    }
}

TEST(TwoLayerLinear, HessianMatchesFiniteDifferences) {
    Rng rng(23);
    for (int t = 0; t < 10; ++t) {
        const auto inst = random_instance(rng, 1 + t % 3, 1 + t % 3, 1, 5);
        const Matrix h = hessian_two_layer_linear(inst);
        const Matrix fd = hessian_fd([&](std::span<const double> p) { return inst.with_parameters(p).loss(); },
                                     inst.parameters());
        EXPECT_LT(oracle::max_abs_diff(h, fd), 1e-4);
        EXPECT_LT(oracle::max_abs_diff(h, transpose(h)), 1e-12);
    }
}

TEST(TwoLayerLinear, HessianNeedsSingleUnitGroups) {
    Rng rng(24);
    EXPECT_THROW(hessian_two_layer_linear(random_instance(rng, 2, 1, 2, 3)), std::invalid_argument);
}

TEST(FiniteDifference, QuadraticIsExact) {
    // f = 1/2 x^T A x + b^T x, gradient A x + b, Hessian A
    const Matrix a{{3, 1, 0}, {1, 2, -1}, {0, -1, 4}};
    const Vector b{1, -2, 0.5};
    auto f = [&](std::span<const double> x) { return 0.5 * dot(x, a * x) + dot(b, x); };
    const Vector x{0.3, -0.7, 1.1};
    const Vector g = grad_fd(f, x);
    const Vector ax = a * std::span<const double>(x);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], ax[i] + b[i], 1e-9);
    EXPECT_LT(oracle::max_abs_diff(hessian_fd(f, x), a), 1e-6);
    EXPECT_THROW(grad_fd(f, x, 0.0), std::invalid_argument);
}

TEST(ClassifyStationary, Verdicts) {
    const Vector origin{0.0, 0.0};
    ClassifyOptions opt;
    opt.n_probes = 200;
    auto strict = [](std::span<const double> x) { return x[0] * x[0] + 2 * x[1] * x[1]; };
    auto saddle = [](std::span<const double> x) { return x[0] * x[0] - x[1] * x[1]; };
    auto flat = [](std::span<const double> x) { return x[0] * x[0]; };
    auto quartic = [](std::span<const double> x) { return x[0] * x[0] + std::pow(x[1], 4); };
    auto quartic_down = [](std::span<const double> x) { return x[0] * x[0] - std::pow(x[1], 4); };
    auto sloped = [](std::span<const double> x) { return x[0] + x[1] * x[1]; };
    EXPECT_EQ(classify_stationary(strict, origin, opt).verdict, MinVerdict::strict_local_min);
    EXPECT_EQ(classify_stationary(saddle, origin, opt).verdict, MinVerdict::saddle);
    EXPECT_EQ(classify_stationary(flat, origin, opt).verdict, MinVerdict::local_min_nonstrict);
    const auto q = classify_stationary(quartic, origin, opt);
    EXPECT_EQ(q.verdict, MinVerdict::strict_local_min);
    EXPECT_EQ(q.null_basis.size(), 1u);
    EXPECT_EQ(classify_stationary(quartic_down, origin, opt).verdict, MinVerdict::inconclusive);
    EXPECT_EQ(classify_stationary(sloped, origin, opt).verdict, MinVerdict::inconclusive);
}
