#include <gtest/gtest.h>

#include "sparseland/linalg.hpp"
#include "sparseland/rng.hpp"
#include "support.hpp"

using namespace sparseland;

TEST(Linalg, ProductMatchesEigen) {
    std::mt19937_64 g(1);
    for (int t = 0; t < 20; ++t) {
        const auto a = oracle::random_eigen(g, 1 + t % 5, 3 + t % 4);
        const auto b = oracle::random_eigen(g, 3 + t % 4, 2 + t % 3);
        const Matrix p = oracle::from_eigen(a) * oracle::from_eigen(b);
        EXPECT_LT(oracle::max_abs_diff(p, oracle::from_eigen(a * b)), 1e-12);
    }
}

TEST(Linalg, ShapeMismatchThrows) {
    EXPECT_THROW(Matrix(2, 3) * Matrix(2, 3), std::invalid_argument);
    EXPECT_THROW(Matrix(2, 3) + Matrix(3, 2), std::invalid_argument);
    EXPECT_THROW((Matrix{{1, 2}, {3}}), std::invalid_argument);
}

TEST(Linalg, StackingAndSelection) {
    const Matrix a{{1, 2}, {3, 4}};
    const Matrix b{{5, 6}};
    const std::array<Matrix, 2> rows{a, b};
    EXPECT_EQ(vstack(rows), (Matrix{{1, 2}, {3, 4}, {5, 6}}));
    const std::array<Matrix, 2> cols{a, transpose(Matrix{{7, 8}})};
    EXPECT_EQ(hstack(cols), (Matrix{{1, 2, 7}, {3, 4, 8}}));
    const std::vector<std::size_t> idx{1, 0};
    EXPECT_EQ(select_rows(a, idx), (Matrix{{3, 4}, {1, 2}}));
    EXPECT_EQ(select_cols(a, idx), (Matrix{{2, 1}, {4, 3}}));
}

TEST(Linalg, SymmetricEigenMatchesEigen) {
    std::mt19937_64 g(2);
    for (int n : {1, 2, 5, 9, 16}) {
        const auto r = oracle::random_eigen(g, n, n);
        const Eigen::MatrixXd s = r + r.transpose();
        const auto res = sym_eig(oracle::from_eigen(s));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
        for (int i = 0; i < n; ++i) EXPECT_NEAR(res.values[i], es.eigenvalues()(i), 1e-10);
        // A v = lambda v for every returned pair
        for (int i = 0; i < n; ++i) {
            const Vector v = column(res.vectors, i);
            const Vector av = oracle::from_eigen(s) * v;
            for (int k = 0; k < n; ++k) EXPECT_NEAR(av[k], res.values[i] * v[k], 1e-9);
        }
    }
}

TEST(Linalg, SymmetricEigenRejectsAsymmetric) {
    EXPECT_THROW(sym_eig(Matrix{{1, 2}, {0, 1}}), std::invalid_argument);
}

TEST(Linalg, SingularValuesMatchEigen) {
    std::mt19937_64 g(3);
    for (auto [r, c] : std::vector<std::pair<int, int>>{{3, 3}, {2, 6}, {7, 3}, {10, 10}}) {
        const auto a = oracle::random_eigen(g, r, c);
        const Vector sv = singular_values(oracle::from_eigen(a));
        Eigen::JacobiSVD<Eigen::MatrixXd> es(a);
        ASSERT_GE(sv.size(), static_cast<std::size_t>(es.singularValues().size()));
        for (Eigen::Index i = 0; i < es.singularValues().size(); ++i) EXPECT_NEAR(sv[i], es.singularValues()(i), 1e-10);
    }
}

TEST(Linalg, RankOfConstructedLowRank) {
    std::mt19937_64 g(4);
    for (int k = 0; k <= 5; ++k) {
        const Eigen::MatrixXd a = oracle::random_eigen(g, 8, k) * oracle::random_eigen(g, k, 6);
        EXPECT_EQ(numerical_rank(oracle::from_eigen(a)), static_cast<std::size_t>(std::min(k, 6)));
    }
    EXPECT_EQ(numerical_rank(Matrix(3, 4)), 0u);
}

TEST(Linalg, PseudoinversePenroseConditions) {
    std::mt19937_64 g(5);
    for (int k : {1, 2, 4}) {
        const Eigen::MatrixXd a = oracle::random_eigen(g, 5, k) * oracle::random_eigen(g, k, 7);
        const Matrix am = oracle::from_eigen(a);
        const Matrix p = pinv(am);
        EXPECT_LT(oracle::max_abs_diff(am * p * am, am), 1e-10);
        EXPECT_LT(oracle::max_abs_diff(p * am * p, p), 1e-10);
        EXPECT_LT(oracle::max_abs_diff(am * p, transpose(am * p)), 1e-10);
        EXPECT_LT(oracle::max_abs_diff(p * am, transpose(p * am)), 1e-10);
        const Eigen::MatrixXd ref = a.completeOrthogonalDecomposition().pseudoInverse();
        EXPECT_LT(oracle::max_abs_diff(p, oracle::from_eigen(ref)), 1e-9);
    }
}

TEST(Rng, DeterministicAndSplittable) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
    const Rng root(7);
    Rng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
    const auto x = s1.next();
    EXPECT_EQ(x, s1b.next());
    EXPECT_NE(x, s2.next());
    EXPECT_NE(derive_seed(7, 1), derive_seed(7, 2));
}

TEST(Rng, UnitVectorHasUnitNorm) {
    Rng r(9);
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(norm(r.unit_vector(1 + i)), 1.0, 1e-14);
}
