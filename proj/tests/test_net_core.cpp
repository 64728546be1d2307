#include <gtest/gtest.h>

#include "sparseland/calculus.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/rng.hpp"
#include "support.hpp"

using namespace sparseland;

namespace {

Mask random_mask(Rng& rng, std::size_t r, std::size_t c, double keep) {
    Mask m(r, c);
    for (auto& v : m.values()) v = rng.bernoulli(keep);
    return m;
}

SparseNet random_net(Rng& rng, const std::vector<std::size_t>& dims, double keep, const Activation& act,
                     bool biases) {
    std::vector<SparseLayer> layers;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        Mask m = random_mask(rng, dims[k + 1], dims[k], keep);
        Matrix w = rng.normal_matrix(dims[k + 1], dims[k]);
        SparseLayer l = SparseLayer::masked(std::move(w), m);
        if (biases) {
            Vector b(dims[k + 1]);
            std::vector<std::uint8_t> bm(dims[k + 1]);
            for (std::size_t r = 0; r < b.size(); ++r) {
                bm[r] = rng.bernoulli(0.4);
                b[r] = bm[r] ? rng.normal() : 0.0;
            }
            l = SparseLayer(l.weights(), l.mask(), b, bm);
        }
        layers.push_back(std::move(l));
    }
    return SparseNet(std::move(layers), act);
}

}  // namespace

TEST(SparseLayer, RejectsNonzeroMaskedEntries) {
    EXPECT_THROW(SparseLayer(Matrix{{1, 2}}, Mask{{1, 0}}), std::invalid_argument);
    EXPECT_THROW(SparseLayer(Matrix{{1, 0}}, Mask{{1, 0}}, Vector{3.0}, {0}), std::invalid_argument);
    EXPECT_THROW(SparseLayer(Matrix{{1, 0}}, Mask{{1, 2}}), std::invalid_argument);
    EXPECT_NO_THROW(SparseLayer(Matrix{{1, 0}}, Mask{{1, 0}}, Vector{0.0}, {0}));
}

TEST(SparseLayer, MaskedEntriesNeverMove) {
    SparseLayer l = SparseLayer::masked(Matrix{{1, 2}, {3, 4}}, Mask{{1, 0}, {0, 1}});
    l.step(Matrix{{0.5, 0.5}, {0.5, 0.5}});
    EXPECT_EQ(l.weights(), (Matrix{{0.5, 0}, {0, 3.5}}));
    EXPECT_THROW(l.set_weight(0, 1, 1.0), std::invalid_argument);
    l.prune(0, 0);
    EXPECT_EQ(l.weights()(0, 0), 0.0);
    EXPECT_EQ(l.unmasked_count(), 1u);
}

TEST(SparseNet, ForwardMatchesScalarLoops) {
    Rng rng(11);
    for (const auto& act : {Activation::linear(), Activation::tanh(), Activation::relu(), Activation::softplus()})
        for (int t = 0; t < 10; ++t) {
            const SparseNet net = random_net(rng, {4, 5, 3, 2}, 0.6, act, t % 2 == 0);
            const Matrix x = rng.normal_matrix(4, 7);
            EXPECT_LT(oracle::max_abs_diff(forward(net, x).output, oracle::naive_forward(net, x)), 1e-12);
        }
}

TEST(SparseNet, RejectsBadShapes) {
    EXPECT_THROW(SparseNet({SparseLayer::dense(Matrix(2, 3))}, Activation::linear()), std::invalid_argument);
    EXPECT_THROW(SparseNet({SparseLayer::dense(Matrix(2, 3)), SparseLayer::dense(Matrix(1, 3))}, Activation::linear()),
                 std::invalid_argument);
    const SparseNet net({SparseLayer::dense(Matrix(2, 3)), SparseLayer::dense(Matrix(1, 2))}, Activation::linear());
    EXPECT_THROW(forward(net, Matrix(2, 4)), std::invalid_argument);
}

TEST(PatternDecomposition, MatchesBruteForceGrouping) {
    Rng rng(12);
    for (int t = 0; t < 50; ++t) {
        Mask m = random_mask(rng, 8, 3, 0.5);
        for (std::size_t r = 0; r < 8; ++r) m(r, rng.next() % 3) = 1;
        const SparseLayer l = SparseLayer::masked(rng.normal_matrix(8, 3), m);
        const Matrix x = rng.normal_matrix(3, 5);
        const PatternDecomposition d = decompose_patterns(l, x);
        std::size_t covered = 0;
        for (std::size_t i = 0; i < d.pattern_count(); ++i) {
            covered += d.width(i);
            for (auto a : d.groups[i])
                for (auto b : d.groups[i]) EXPECT_TRUE(oracle::same_row(m, a, b));
            for (std::size_t j = i + 1; j < d.pattern_count(); ++j)
                EXPECT_FALSE(oracle::same_row(m, d.groups[i].front(), d.groups[j].front()));
            // first-occurrence order
            if (i > 0) { EXPECT_LT(d.groups[i - 1].front(), d.groups[i].front()); }
            for (std::size_t k = 0; k < d.support_size(i); ++k)
                for (std::size_t c = 0; c < x.cols(); ++c)
                    EXPECT_EQ(d.data_slices[i](k, c), x(d.supports[i][k], c));
        }
        EXPECT_EQ(covered, 8u);
    }
}

TEST(PatternDecomposition, EmptyRowIsAnError) {
    const SparseLayer l = SparseLayer::masked(Matrix{{1, 1}, {1, 1}}, Mask{{1, 0}, {0, 0}});
    try {
        decompose_patterns(l, Matrix(2, 3));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("ineffective hidden neuron 1"), std::string::npos);
    }
}

TEST(PatternDecomposition, GroupBlocksScatterBack) {
    Rng rng(13);
    Mask m{{1, 1, 0}, {0, 1, 1}, {1, 1, 0}, {0, 0, 1}};
    const SparseLayer l = SparseLayer::masked(rng.normal_matrix(4, 3), m);
    const Matrix x = rng.normal_matrix(3, 6);
    const Matrix u = rng.normal_matrix(2, 4);
    const auto d = decompose_patterns(l, x);
    const auto wb = group_weights(l, d);
    const auto ub = group_output_weights(u, d);
    EXPECT_EQ(scatter_group_weights(d, wb, 4, 3), l.weights());
    EXPECT_EQ(scatter_group_output_weights(d, ub, 2, 4), u);
    EXPECT_LT(oracle::max_abs_diff(pattern_output(ub, wb, d.data_slices), u * l.weights() * x), 1e-12);
}

TEST(Reduction, KeepsExactlyTheEdgesOnPaths) {
    Rng rng(14);
    for (const auto& act : {Activation::tanh(), Activation::sigmoid()})
        for (int t = 0; t < 60; ++t) {
            const SparseNet net = random_net(rng, {3, 4, 4, 3, 2}, 0.45, act, t % 3 == 0);
            const auto keep = oracle::edges_on_paths(net);
            const ReductionResult red = reduce_connections(net);
            for (std::size_t k = 0; k < net.depth(); ++k) {
                const auto& l = red.net.layer(k);
                for (std::size_t r = 0; r < l.out_dim(); ++r)
                    for (std::size_t c = 0; c < l.in_dim(); ++c)
                        EXPECT_EQ(static_cast<bool>(l.mask()(r, c)), keep.count({k, r, c}) == 1)
                            << act.name() << " trial " << t << " edge " << k << "," << r << "," << c;
            }
            // reduction never changes the function
            const Matrix x = rng.normal_matrix(3, 5);
            EXPECT_LT(oracle::max_abs_diff(forward(net, x).output, forward(red.net, x).output), 1e-12);
            // idempotent
            EXPECT_TRUE(reduce_connections(red.net).report.empty());
        }
}

TEST(Reduction, IsolatedInputIsReportedOrThrown) {
    // input 0 only feeds a hidden neuron with no outgoing edge
    const Matrix w1{{1, 0, 0}, {0, 1, 1}};
    const Mask m1{{1, 0, 0}, {0, 1, 1}};
    const Matrix w2{{0, 1}};
    const Mask m2{{0, 1}};
    const SparseNet net({SparseLayer(w1, m1), SparseLayer(w2, m2)}, Activation::tanh());
    EXPECT_THROW(effective_subnetwork(net), std::runtime_error);
    const auto red = effective_subnetwork(net, IsolationPolicy::report);
    ASSERT_EQ(red.report.isolated_inputs.size(), 1u);
    EXPECT_EQ(red.report.isolated_inputs[0], 0u);
    ASSERT_EQ(red.report.neutered_neurons.size(), 1u);
    EXPECT_EQ(red.report.neutered_neurons[0], (NeuronId{1, 0}));
    EXPECT_EQ(red.report.removed_edges.size(), 1u);
}

TEST(Reduction, ConstantActivationKeepsHiddenSources) {
    // With sigma(0) != 0 a hidden neuron without inputs still feeds the output.
    const SparseNet net({SparseLayer(Matrix{{1, 0}, {0, 0}}, Mask{{1, 0}, {0, 0}}),
                         SparseLayer::dense(Matrix{{1, 1}})},
                        Activation::sigmoid());
    const auto red = reduce_connections(net);
    EXPECT_EQ(red.net.layer(1).unmasked_count(), 2u);
    const SparseNet lin(net.layers(), Activation::tanh());
    EXPECT_EQ(reduce_connections(lin).net.layer(1).unmasked_count(), 1u);
}

TEST(Gradient, BackpropMatchesFiniteDifferences) {
    Rng rng(15);
    for (const auto& act : {Activation::linear(), Activation::tanh(), Activation::softplus()})
        for (int t = 0; t < 8; ++t) {
            const SparseNet net = random_net(rng, {3, 4, 3, 2}, 0.7, act, true);
            const Matrix x = rng.normal_matrix(3, 5);
            const Matrix y = rng.normal_matrix(2, 5);
            double l = 0;
            const NetGradient g = loss_gradient(net, x, y, &l);
            EXPECT_DOUBLE_EQ(l, loss(net, x, y));
            const NetGradient fd = grad_fd(net, x, y);
            const Vector a = flatten_gradient(net, g), b = flatten_gradient(net, fd);
            for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6 * std::max(1.0, std::abs(b[i])));
            for (std::size_t k = 0; k < net.depth(); ++k)
                for (std::size_t i = 0; i < g.weights[k].size(); ++i)
                    if (!net.layer(k).mask().values()[i]) { EXPECT_EQ(g.weights[k].values()[i], 0.0); }
        }
}

TEST(FlatParameters, RoundTrip) {
    Rng rng(16);
    const SparseNet net = random_net(rng, {3, 4, 2}, 0.6, Activation::tanh(), true);
    const Vector p = flatten_parameters(net);
    EXPECT_EQ(p.size(), net.parameter_count());
    EXPECT_EQ(with_parameters(net, p), net);
    Vector q = p;
    for (double& v : q) v += 1.0;
    const SparseNet moved = with_parameters(net, q);
    for (std::size_t k = 0; k < net.depth(); ++k) EXPECT_EQ(moved.layer(k).mask(), net.layer(k).mask());
    EXPECT_THROW(with_parameters(net, Vector(p.size() + 1)), std::invalid_argument);
}
