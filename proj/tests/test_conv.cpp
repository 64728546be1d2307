#include <gtest/gtest.h>

#include "sparseland/conv_modes.hpp"
#include "sparseland/rng.hpp"
#include "support.hpp"

using namespace sparseland;

namespace {

oracle::Pad pad_of(ConvMode m) {
    return m == ConvMode::full ? oracle::Pad::full : m == ConvMode::same ? oracle::Pad::same : oracle::Pad::valid;
}

const ConvMode kModes[] = {ConvMode::full, ConvMode::same, ConvMode::valid};

}  // namespace

TEST(ConvMatrix, MatchesSlidingWindow) {
    Rng rng(31);
    for (ConvMode mode : kModes)
        for (std::size_t d1 = 1; d1 <= 4; ++d1)
            for (std::size_t d = d1; d <= 7; ++d) {
                Vector w(d1), x(d);
                for (double& v : w) v = rng.normal();
                for (double& v : x) v = rng.normal();
                const ConvSpec spec{w, d, mode};
                const Vector got = conv_matrix(spec) * std::span<const double>(x);
                const Vector want = oracle::sliding_conv(w, x, pad_of(mode));
                ASSERT_EQ(got.size(), want.size());
                ASSERT_EQ(got.size(), spec.output_length());
                for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
            }
}

TEST(ConvMatrix, OutputLengths) {
    EXPECT_EQ((ConvSpec{{1, 2, 3}, 5, ConvMode::full}).output_length(), 7u);
    EXPECT_EQ((ConvSpec{{1, 2, 3}, 5, ConvMode::same}).output_length(), 5u);
    EXPECT_EQ((ConvSpec{{1, 2, 3}, 5, ConvMode::valid}).output_length(), 3u);
    EXPECT_THROW((ConvSpec{{1, 2, 3}, 2, ConvMode::valid}).validate(), std::invalid_argument);
    EXPECT_THROW((ConvSpec{{}, 2, ConvMode::same}).validate(), std::invalid_argument);
}

TEST(ConvMatrix, MaskIsTheSupportOfAGenericKernel) {
    for (ConvMode mode : kModes) {
        const Matrix f = conv_matrix({{1.5, -2.0, 0.7}, 5, mode});
        const Mask m = conv_mask(3, 5, mode);
        for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(m.values()[i] != 0, f.values()[i] != 0.0);
    }
}

TEST(ConvRank, LeadingZeroExample) {
    const ConvSpec spec{{0, 3}, 4, ConvMode::same};
    EXPECT_EQ(conv_rank_expected(spec), 3u);
    EXPECT_EQ(numerical_rank(conv_matrix(spec)), 3u);
}

TEST(ConvRank, ClosedFormAgreesWithSvdOnSmallSweep) {
    Rng rng(32);
    for (ConvMode mode : kModes)
        for (std::size_t d1 = 1; d1 <= 3; ++d1)
            for (std::size_t d = d1; d <= 5; ++d)
                for (std::size_t lead = 0; lead <= d1; ++lead) {
                    Vector w(d1, 0.0);
                    for (std::size_t k = lead; k < d1; ++k) w[k] = rng.uniform(0.5, 1.5);
                    const ConvSpec spec{w, d, mode};
                    EXPECT_EQ(conv_rank_expected(spec), numerical_rank(conv_matrix(spec)))
                        << to_string(mode) << " d1=" << d1 << " d=" << d << " lead=" << lead;
                }
}

TEST(ConvPatches, RowsOfFXAreKernelTimesPatch) {
    Rng rng(33);
    for (ConvMode mode : kModes) {
        const Vector w{0.4, -1.2, 2.0};
        const Matrix x = rng.normal_matrix(6, 4);
        const Matrix fx = conv_matrix({w, 6, mode}) * x;
        const auto patches = conv_patches(x, 3, mode);
        ASSERT_EQ(patches.size(), fx.rows());
        for (std::size_t r = 0; r < fx.rows(); ++r) {
            const Vector row = transpose(patches[r]) * std::span<const double>(w);
            for (std::size_t c = 0; c < x.cols(); ++c) EXPECT_NEAR(row[c], fx(r, c), 1e-12);
        }
    }
}

TEST(ConvStack, ChannelsStackVertically) {
    const std::vector<Vector> kernels{{1, 2}, {0, 3}, {-1, 1}};
    const Matrix s = stacked_conv_matrix(kernels, 4, ConvMode::same);
    EXPECT_EQ(s.rows(), 12u);
    for (std::size_t j = 0; j < kernels.size(); ++j) {
        const Matrix f = conv_matrix({kernels[j], 4, ConvMode::same});
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(s(j * 4 + r, c), f(r, c));
    }
    Rng rng(34);
    const Matrix x = rng.normal_matrix(4, 3);
    const Matrix u = rng.normal_matrix(2, 12);
    EXPECT_LT(oracle::max_abs_diff(conv_linear_output_patches(u, kernels, x, ConvMode::same), u * (s * x)), 1e-12);
}

TEST(ConvMode, Names) {
    EXPECT_EQ(conv_mode_from_name("same"), ConvMode::same);
    EXPECT_EQ(conv_mode_from_name("VALID"), ConvMode::valid);
    EXPECT_STREQ(to_string(ConvMode::full), "FULL");
    EXPECT_THROW(conv_mode_from_name("circular"), std::invalid_argument);
}
