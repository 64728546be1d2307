#include <gtest/gtest.h>

#include "sparseland/landscape.hpp"
#include "support.hpp"

using namespace sparseland;

TEST(ZeroPath, PreservesProductAndZeroesDependentColumns) {
    Rng rng(41);
    for (int t = 0; t < 40; ++t) {
        const std::size_t p = 2 + t % 5, d = 1 + t % 4, k = 1 + t % std::min(p, d);
        const Matrix w = rng.normal_matrix(p, k) * rng.normal_matrix(k, d);
        const Matrix u = rng.normal_matrix(3, p);
        const ZeroPathResult z = zero_path_transform(u, w);
        EXPECT_LT(oracle::max_abs_diff(z.u0 * w, u * w), 1e-10 * std::max(1.0, frobenius_norm(u * w)));
        const std::size_t r = oracle::to_eigen(w).fullPivLu().rank();
        EXPECT_EQ(z.rank(), r);
        EXPECT_EQ(z.dependent_rows.size(), p - r);
        for (auto j : z.dependent_rows)
            for (std::size_t i = 0; i < u.rows(); ++i) EXPECT_EQ(z.u0(i, j), 0.0);
    }
}

TEST(ZeroPath, FirstIndependentRowsFormTheBasis) {
    const Matrix w{{1, 0}, {2, 0}, {0, 1}, {1, 1}};
    const ZeroPathResult z = zero_path_transform(Matrix{{1, 1, 1, 1}}, w);
    EXPECT_EQ(z.basis_rows, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(z.dependent_rows, (std::vector<std::size_t>{1, 3}));
    // u0 = (1 + 2 + 1, 0, 1 + 1, 0)
    EXPECT_NEAR(z.u0(0, 0), 4.0, 1e-12);
    EXPECT_NEAR(z.u0(0, 2), 2.0, 1e-12);
}

TEST(Polyline, SamplesIncludeBoundariesAndEnd) {
    const std::vector<Vector> nodes{{0.0}, {1.0}, {3.0}};
    const PathTrace tr = sample_polyline(nodes, {"a", "b"}, [](std::span<const double> p) { return -p[0]; }, 5);
    EXPECT_EQ(tr.samples.front().t, 0.0);
    EXPECT_EQ(tr.samples.back().t, 1.0);
    EXPECT_EQ(tr.samples.back().parameters[0], 3.0);
    EXPECT_EQ(tr.end_loss, -3.0);
    EXPECT_EQ(tr.monotone_violation, 0.0);
    ASSERT_EQ(tr.segments.size(), 2u);
    EXPECT_EQ(tr.segments[1].t_begin, 0.5);
    EXPECT_THROW(sample_polyline(nodes, {"a"}, [](std::span<const double>) { return 0.0; }, 5), std::invalid_argument);
}

TEST(PropertyPPath, Condition1ReachesTheLeastSquaresOptimum) {
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const PathInstance inst = random_path_instance(1, seed);
        const PathTrace tr = property_p_path(inst, 300);
        // oracle: least squares of Y on the rows of X
        const Eigen::MatrixXd x = oracle::to_eigen(inst.x), y = oracle::to_eigen(inst.y);
        const Eigen::MatrixXd fit = x.transpose().completeOrthogonalDecomposition().solve(y.transpose());
        const double opt = 0.5 * (y - fit.transpose() * x).squaredNorm();
        EXPECT_LE(tr.monotone_violation, 1e-10);
        EXPECT_NEAR(tr.end_loss, opt, 1e-8);
        EXPECT_NEAR(tr.samples.front().loss, 0.5 * frobenius_norm_sq(inst.u * inst.layer.weights() * inst.x - inst.y),
                    1e-9);
    }
}

TEST(PropertyPPath, Condition3ReachesTheLeastSquaresOptimum) {
    for (std::uint64_t seed = 100; seed < 115; ++seed) {
        const PathInstance inst = random_path_instance(3, seed);
        const PathTrace tr = property_p_path(inst, 300);
        const Eigen::MatrixXd x = oracle::to_eigen(inst.x), y = oracle::to_eigen(inst.y);
        const Eigen::MatrixXd fit = x.transpose().completeOrthogonalDecomposition().solve(y.transpose());
        EXPECT_LE(tr.monotone_violation, 1e-10);
        EXPECT_NEAR(tr.end_loss, 0.5 * (y - fit.transpose() * x).squaredNorm(), 1e-8);
    }
}

TEST(PropertyPPath, ViolatedConditionsAreRejected) {
    const SparseLayer l(Matrix{{1, 2}}, Mask{{1, 1}});
    const Matrix x{{1, 2, 3}, {0, 1, 0}};
    const auto d = decompose_patterns(l, x);
    EXPECT_THROW(property_p_path_cond1(d, group_weights(l, d), Matrix{{1}}, Matrix{{1, 1, 1}}), std::invalid_argument);
    EXPECT_THROW(property_p_path_cond3(d, scalar_output_params(d, l.weights(), Matrix{{1}}), Matrix(2, 3)),
                 std::invalid_argument);
}

TEST(Conditions, ReportOnAHandBuiltNet) {
    // groups {0,1} on support {0,1} and {2} on support {2}
    const Matrix w{{1, 1, 0}, {1, -1, 0}, {0, 0, 2}};
    const Mask m{{1, 1, 0}, {1, 1, 0}, {0, 0, 1}};
    const SparseNet net({SparseLayer(w, m), SparseLayer::dense(Matrix{{1, 1, 1}})}, Activation::linear());
    const Matrix x = Matrix::identity(3);
    const ConditionReport rep = check_conditions(net, x, Matrix{{1, 2, 3}});
    EXPECT_TRUE(rep.cond_overparam);
    EXPECT_TRUE(rep.cond_orthogonal);
    EXPECT_TRUE(rep.cond_scalar);
    EXPECT_TRUE(rep.width_vs_n);
    EXPECT_TRUE(rep.fanin_ok);
    EXPECT_EQ(rep.widths, (std::vector<std::size_t>{2, 1}));
    EXPECT_EQ(rep.support_sizes, (std::vector<std::size_t>{2, 1}));
    const ConditionReport bad = check_conditions(net, Matrix{{1, 1}, {1, 0}, {1, 2}}, Matrix{{1, 2}});
    EXPECT_FALSE(bad.cond_orthogonal);
}

TEST(IntrinsicDimension, CountsMonomialsUpToTheDegree) {
    // sigma(z) = z^2: only degree-2 monomials, C(d + 1, 2)
    EXPECT_EQ(intrinsic_dim_bound(Activation::polynomial({0, 0, 1}), 3, 100), 6u);
    // full cubic in d = 2: C(2 + 3, 3) = 10
    EXPECT_EQ(intrinsic_dim_bound(Activation::polynomial({1, 1, 1, 1}), 2, 100), 10u);
    EXPECT_EQ(intrinsic_dim_bound(Activation::polynomial({1, 1, 1, 1}), 2, 7), 7u);
    EXPECT_EQ(intrinsic_dim_bound(Activation::tanh(), 4, 9), 9u);
    EXPECT_EQ(binomial(6, 2), 15.0);
}

TEST(Assumptions, DataAndMaskChecks) {
    const Matrix good{{1, -2, 3}, {0.5, 0.25, -4}};
    EXPECT_TRUE(check_assumptions(good, Mask{{1, 0}, {0, 1}}).ok());
    EXPECT_FALSE(check_assumptions(Matrix{{1, -1, 3}}, Mask{{1}}).data_ok);
    EXPECT_FALSE(check_assumptions(Matrix{{1, 0, 3}}, Mask{{1}}).data_ok);
    const auto rep = check_assumptions(good, Mask{{1, 0}, {0, 0}});
    EXPECT_FALSE(rep.mask_ok);
    EXPECT_EQ(rep.violations.size(), 1u);
}

TEST(Admissibility, AnalyticActivations) {
    const auto t = activation_admissible(Activation::tanh(), 5);
    ASSERT_TRUE(t.admissible);
    for (int l : t.orders) EXPECT_NE(*Activation::tanh().taylor_at_zero(l), 0.0);
    EXPECT_TRUE(activation_admissible(Activation::sigmoid(), 8).admissible);
    EXPECT_FALSE(activation_admissible(Activation::relu(), 3).admissible);
    // a quadratic has only three nonzero derivatives at 0
    EXPECT_FALSE(activation_admissible(Activation::polynomial({1, 1, 1}), 4).admissible);
    EXPECT_TRUE(activation_admissible(Activation::polynomial({1, 1, 1}), 3).admissible);
}

TEST(HiddenRank, SquareSigmoidLayerIsFullRank) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const RankInstance ri = random_rank_instance(Activation::sigmoid(), 6, seed);
        const ForwardResult fr = forward(ri.net, ri.x);
        const std::size_t want = oracle::to_eigen(fr.hidden_outputs[0]).fullPivLu().rank();
        EXPECT_EQ(hidden_rank_certificate(ri.net, ri.x), (std::vector<std::size_t>{want}));
    }
    // a linear layer with a rank-deficient mask cannot reach full rank
    const SparseNet net({SparseLayer(Matrix{{1, 0}, {2, 0}}, Mask{{1, 0}, {1, 0}}), SparseLayer::dense(Matrix{{1, 1}})},
                        Activation::linear());
    EXPECT_EQ(hidden_rank_certificate(net, Matrix::identity(2)), (std::vector<std::size_t>{1}));
}

TEST(FeatureMaps, InnerProductEqualsActivation) {
    Rng rng(42);
    const std::vector<double> coeffs{0.3, -1.0, 0.5, 2.0};
    const PolyFeatureMaps fm = poly_feature_maps(coeffs, 3);
    EXPECT_EQ(fm.feature_dim(), 20u);  // C(3 + 3, 3)
    for (int t = 0; t < 50; ++t) {
        Vector w(3), x(3);
        for (double& v : w) v = rng.normal();
        for (double& v : x) v = rng.normal();
        const double b = rng.normal();
        double z = b;
        for (int k = 0; k < 3; ++k) z += w[k] * x[k];
        const double direct = coeffs[0] + coeffs[1] * z + coeffs[2] * z * z + coeffs[3] * z * z * z;
        EXPECT_NEAR(dot(fm.psi(w, b), fm.phi(x)), direct, 1e-10);
    }
    // highest degree first
    int prev = 99;
    for (const auto& e : fm.exponents()) {
        const int deg = e[0] + e[1] + e[2];
        EXPECT_LE(deg, prev);
        prev = deg;
    }
    EXPECT_EQ(fm.index_of(fm.exponents()[7]), 7u);
}
