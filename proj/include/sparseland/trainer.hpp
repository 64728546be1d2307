#pragma once

// Deterministic full-batch gradient descent on masked networks, synthetic
// regression data, and repeated-trial statistics with loss clustering.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sparseland/counterexamples.hpp"
#include "sparseland/landscape.hpp"
#include "sparseland/linalg.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/rng.hpp"

namespace sparseland {

// ---------------------------------------------------------------------------
// Data

struct Dataset {
    Matrix x;  // d_x x n
    Matrix y;  // d_y x n
    Matrix a;  // the linear map used to generate y
    std::uint64_t seed = 0;
    double noise = 0.0;
    double a_norm = 0.0;
};

/// y_i = A x_i + noise * eps_i with Gaussian x, eps and a Gaussian A rescaled
/// to Frobenius norm a_norm. With identity_target, A = I (needs d_y = d_x).
inline Dataset gen_synthetic(std::size_t n, std::size_t d_x, std::size_t d_y, std::uint64_t seed,
                             double a_norm = 5.0, double noise = 1.0, bool identity_target = false) {
    if (n == 0 || d_x == 0 || d_y == 0) throw std::invalid_argument("gen_synthetic: dimensions must be positive");
    const Rng root(seed);
    Rng xs = root.split(1), as = root.split(2), es = root.split(3);
    Dataset ds;
    ds.seed = seed;
    ds.noise = noise;
    ds.x = xs.normal_matrix(d_x, n);
    if (identity_target) {
        if (d_x != d_y) throw std::invalid_argument("gen_synthetic: identity target needs d_y = d_x");
        ds.a = Matrix::identity(d_x);
    } else {
        ds.a = as.normal_matrix(d_y, d_x);
        ds.a = (a_norm / frobenius_norm(ds.a)) * ds.a;
    }
    ds.a_norm = frobenius_norm(ds.a);
    ds.y = ds.a * ds.x;
    if (noise != 0.0) ds.y = ds.y + noise * es.normal_matrix(d_y, n);
    return ds;
}

// ---------------------------------------------------------------------------
// Masks and initialization

inline Mask random_sparse_mask(std::size_t rows, std::size_t cols, double sparsity, std::uint64_t seed) {
    if (!(sparsity >= 0.0 && sparsity < 1.0)) throw std::invalid_argument("random_sparse_mask: sparsity must be in [0, 1)");
    Mask m(rows, cols, 1);
    if (sparsity == 0.0) return m;
    Rng rng(seed);
    for (auto& v : m.values()) v = rng.bernoulli(1.0 - sparsity) ? 1 : 0;
    return m;
}

inline double realized_sparsity(const SparseNet& net) {
    double total = 0.0, kept = 0.0;
    for (const auto& l : net.layers()) {
        total += static_cast<double>(l.mask().size());
        for (auto m : l.mask().values()) kept += m;
    }
    return total == 0.0 ? 0.0 : 1.0 - kept / total;
}

/// Unmasked weights (and biases) drawn uniformly from +-scale/sqrt(fan_in),
/// fan_in being the layer's dense input width.
inline SparseNet initialize_weights(const SparseNet& net, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    SparseNet out = net;
    for (auto& l : out.mutable_layers()) {
        const double bound = scale / std::sqrt(static_cast<double>(l.in_dim()));
        for (std::size_t r = 0; r < l.out_dim(); ++r)
            for (std::size_t c = 0; c < l.in_dim(); ++c)
                if (l.mask()(r, c)) l.set_weight(r, c, rng.uniform(-bound, bound));
        if (l.bias())
            for (std::size_t r = 0; r < l.out_dim(); ++r)
                if (l.has_bias(r)) l.set_bias(r, rng.uniform(-bound, bound));
    }
    return out;
}

struct SparseNetDraw {
    SparseNet net;
    RemovalReport report;
    double sparsity = 0.0;  // after reduction
    std::uint64_t attempts = 0;
};

/// Random masks for the layer widths `dims` (d_x, h_1, ..., d_y), reduced to
/// the effective sub-network. Draws that isolate an input or output are
/// retried with the next derived seed.
inline SparseNetDraw random_sparse_net(const std::vector<std::size_t>& dims, double sparsity, const Activation& act,
                                       std::uint64_t seed, std::uint64_t max_attempts = 100) {
    if (dims.size() < 3) throw std::invalid_argument("random_sparse_net: need at least two layers");
    for (std::uint64_t attempt = 0; attempt < max_attempts; ++attempt) {
        const Rng root(derive_seed(seed, attempt));
        std::vector<SparseLayer> layers;
        for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
            Mask m = random_sparse_mask(dims[k + 1], dims[k], sparsity, root.split(k).next());
            layers.push_back(SparseLayer::masked(Matrix(dims[k + 1], dims[k]), std::move(m)));
        }
        SparseNet net(std::move(layers), act);
        ReductionResult red = reduce_connections(net);
        if (!red.report.effective()) continue;
        SparseNetDraw out{std::move(red.net), std::move(red.report), 0.0, attempt + 1};
        out.sparsity = realized_sparsity(out.net);
        return out;
    }
    throw std::runtime_error("network not effective after " + std::to_string(max_attempts) + " mask draws");
}

// ---------------------------------------------------------------------------
// Training

enum class Objective { half_sse, mse };
enum class InitKind { default_uniform_fanin, scaled, keep };
enum class StopReason { converged_grad, converged_plateau, max_epochs, diverged };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::converged_grad: return "converged_grad";
        case StopReason::converged_plateau: return "converged_plateau";
        case StopReason::max_epochs: return "max_epochs";
        case StopReason::diverged: return "diverged";
    }
    return "max_epochs";
}
inline const char* to_string(Objective o) { return o == Objective::mse ? "mse" : "half_sse"; }
inline const char* to_string(InitKind k) {
    switch (k) {
        case InitKind::default_uniform_fanin: return "default_uniform_fanin";
        case InitKind::scaled: return "scaled";
        case InitKind::keep: return "keep";
    }
    return "default_uniform_fanin";
}

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t max_epochs = 50000;
    double grad_tol = 1e-8;
    std::size_t plateau_window = 200;
    double plateau_rel_tol = 1e-12;
    std::uint64_t seed = 0;
    InitKind init = InitKind::default_uniform_fanin;
    double init_scale = 1.0;       // used by InitKind::scaled
    std::size_t rank_every = 0;    // 0 disables rank tracking
    Objective objective = Objective::half_sse;
};

struct RankSample {
    std::size_t epoch = 0;
    std::vector<std::size_t> ranks;
};

struct TrainTrace {
    std::vector<double> losses;  // objective value before each update, plus the final value
    std::vector<RankSample> ranks;
    SparseNet final_net;
    std::size_t epochs = 0;      // updates applied
    StopReason stop = StopReason::max_epochs;
    double final_grad_norm = 0.0;
    double final_loss() const { return losses.empty() ? 0.0 : losses.back(); }
};

inline double objective_scale(Objective o, const Matrix& y) {
    return o == Objective::mse ? 2.0 / static_cast<double>(y.size()) : 1.0;
}

/// Objective value; both conventions are multiples of 1/2 ||R||^2.
inline double objective_value(Objective o, const SparseNet& net, const Matrix& x, const Matrix& y) {
    return objective_scale(o, y) * loss(net, x, y);
}

inline TrainTrace gd_train(const SparseNet& net, const Dataset& data, const TrainConfig& cfg) {
    if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("gd_train: learning rate must be non-negative");
    TrainTrace trace;
    SparseNet cur = net;
    switch (cfg.init) {
        case InitKind::default_uniform_fanin: cur = initialize_weights(net, cfg.seed, 1.0); break;
        case InitKind::scaled: cur = initialize_weights(net, cfg.seed, cfg.init_scale); break;
        case InitKind::keep: break;
    }
    const double scale = objective_scale(cfg.objective, data.y);
    const std::size_t depth = cur.depth();
    Vector bias_step;
    for (std::size_t epoch = 0;; ++epoch) {
        double half_sse = 0.0;
        const NetGradient g = loss_gradient(cur, data.x, data.y, &half_sse);
        const double l = scale * half_sse;
        trace.losses.push_back(l);
        if (!std::isfinite(l)) {
            trace.stop = StopReason::diverged;
            break;
        }
        if (cfg.rank_every && epoch % cfg.rank_every == 0)
            trace.ranks.push_back({epoch, hidden_rank_certificate(cur, data.x)});
        trace.final_grad_norm = scale * std::sqrt(g.norm_sq());
        if (trace.final_grad_norm < cfg.grad_tol) {
            trace.stop = StopReason::converged_grad;
            break;
        }
        if (cfg.plateau_window && epoch >= cfg.plateau_window) {
            const double past = trace.losses[epoch - cfg.plateau_window];
            if (std::abs(past - l) <= cfg.plateau_rel_tol * std::abs(past)) {
                trace.stop = StopReason::converged_plateau;
                break;
            }
        }
        if (epoch >= cfg.max_epochs) {
            trace.stop = StopReason::max_epochs;
            break;
        }
        const double step = cfg.learning_rate * scale;
        auto& layers = cur.mutable_layers();
        for (std::size_t k = 0; k < depth; ++k) {
            const Matrix dw = step * g.weights[k];
            if (!g.biases[k].empty()) {
                bias_step = g.biases[k];
                for (double& v : bias_step) v *= step;
                layers[k].step(dw, &bias_step);
            } else {
                layers[k].step(dw);
            }
        }
        ++trace.epochs;
    }
    trace.final_net = std::move(cur);
    return trace;
}

// ---------------------------------------------------------------------------
// Trials

enum class TrialClass { valley, escaped, other };

inline const char* to_string(TrialClass c) {
    switch (c) {
        case TrialClass::valley: return "valley";
        case TrialClass::escaped: return "escaped";
        case TrialClass::other: return "other";
    }
    return "other";
}

struct TrialResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double final_loss = 0.0;  // in the problem's reporting convention
    std::size_t epochs = 0;
    StopReason stop = StopReason::max_epochs;
    TrialClass cls = TrialClass::other;
};

struct LossCluster {
    double center = 0.0;
    std::size_t count = 0;
    TrialClass cls = TrialClass::other;
};

struct TrialStats {
    std::size_t n_trials = 0;
    std::vector<TrialResult> trials;
    std::vector<LossCluster> clusters;

    std::size_t count(TrialClass c) const {
        return static_cast<std::size_t>(
            std::count_if(trials.begin(), trials.end(), [&](const TrialResult& t) { return t.cls == c; }));
    }
    double fraction(TrialClass c) const { return n_trials ? static_cast<double>(count(c)) / n_trials : 0.0; }
};

struct TrialProblem {
    SparseNet net;  // structure; weights are re-initialized per trial
    Dataset data;
    double report_scale = 1.0;  // reported loss = report_scale * trained objective
    std::function<TrialClass(const SparseNet&, double)> classify;
};

/// Sorted losses are merged greedily: a loss joins the current cluster when
/// it lies within rel_tol (relative, with abs_floor) of the cluster's first member.
inline std::vector<LossCluster> cluster_losses(const std::vector<TrialResult>& trials, double rel_tol = 1e-3,
                                               double abs_floor = 1e-6) {
    std::vector<const TrialResult*> sorted;
    for (const auto& t : trials) sorted.push_back(&t);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const TrialResult* a, const TrialResult* b) { return a->final_loss < b->final_loss; });
    std::vector<LossCluster> out;
    std::vector<std::array<std::size_t, 3>> votes;
    double anchor = 0.0, sum = 0.0;
    for (const TrialResult* t : sorted) {
        const double l = t->final_loss;
        if (out.empty() || std::abs(l - anchor) > std::max(rel_tol * std::abs(anchor), abs_floor)) {
            if (!out.empty()) out.back().center = sum / static_cast<double>(out.back().count);
            out.push_back({l, 0, TrialClass::other});
            votes.push_back({0, 0, 0});
            anchor = l;
            sum = 0.0;
        }
        ++out.back().count;
        sum += l;
        ++votes.back()[static_cast<std::size_t>(t->cls)];
    }
    if (!out.empty()) out.back().center = sum / static_cast<double>(out.back().count);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& v = votes[i];
        out[i].cls = static_cast<TrialClass>(std::max_element(v.begin(), v.end()) - v.begin());
    }
    return out;
}

/// Trial t trains from seed base + t. Trials run on `threads` workers; the
/// result does not depend on the thread count.
inline TrialStats run_trials(const TrialProblem& problem, std::size_t n_trials, const TrainConfig& base,
                             unsigned threads = 0) {
    TrialStats stats;
    stats.n_trials = n_trials;
    stats.trials.resize(n_trials);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n_trials, 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < n_trials; t = next++) {
            TrainConfig cfg = base;
            cfg.seed = base.seed + t;
            const TrainTrace tr = gd_train(problem.net, problem.data, cfg);
            TrialResult r;
            r.index = t;
            r.seed = cfg.seed;
            r.final_loss = problem.report_scale * tr.final_loss();
            r.epochs = tr.epochs;
            r.stop = tr.stop;
            r.cls = problem.classify ? problem.classify(tr.final_net, r.final_loss) : TrialClass::other;
            stats.trials[t] = r;
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    stats.clusters = cluster_losses(stats.trials);
    return stats;
}

/// Trials on the sparse-sparse valley instance, reported as the plain
/// squared norm. Valley: loss within 1e-3 relative of y4^2 and |w4| <= 1e-4;
/// escaped: loss below 0.95 y4^2.
inline TrialProblem ss_trial_problem(const SSValleyInstance& inst) {
    TrialProblem p;
    p.net = ss_network(inst.activation, Vector(8, 0.0));
    p.data.x = inst.x;
    p.data.y = inst.y;
    p.report_scale = 2.0;
    const double level = inst.valley_level();
    p.classify = [level](const SparseNet& net, double l) {
        const double w4 = ss_theta(net)[3];
        if (std::abs(l - level) <= 1e-3 * level && std::abs(w4) <= 1e-4) return TrialClass::valley;
        if (l < 0.95 * level) return TrialClass::escaped;
        return TrialClass::other;
    };
    return p;
}

/// 1/2 ||Y (I - X^+ X)||^2 scaled to the chosen objective.
inline double linear_optimum(Objective o, const Matrix& x, const Matrix& y) {
    return objective_scale(o, y) * dense_least_squares_optimum(x, y);
}

}  // namespace sparseland
