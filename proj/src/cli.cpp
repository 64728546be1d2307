#include "cli.hpp"

#include <cstdlib>
#include <cstring>
#include <ostream>

#include <CLI11.hpp>

#include "sparseland/conv_modes.hpp"
#include "sparseland/counterexamples.hpp"
#include "sparseland/io.hpp"
#include "sparseland/landscape.hpp"
#include "sparseland/trainer.hpp"

namespace sparseland::cli {
namespace {

class UsageError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::uint64_t seed = 0;
    std::string out;
    std::string manifest;
    bool json = false;
};

struct Ctx {
    std::ostream& out;
    std::ostream& err;
    Common common;
    RunManifest manifest;
};

void add_common(CLI::App* sub, Common& c, std::uint64_t default_seed) {
    c.seed = default_seed;
    sub->add_option("--seed", c.seed, "random seed (the SEED environment variable overrides it)");
    sub->add_option("--out", c.out, "output file");
    sub->add_option("--manifest", c.manifest, "manifest path (default: <out>.manifest.json)");
    sub->add_flag("--json", c.json, "print a JSON summary");
}

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(detail::parse_rational(item, what));
        } catch (const SpecError& e) {
            throw UsageError(e.what());
        }
    }
    if (v.empty()) throw UsageError(what + ": empty list");
    return v;
}

Activation activation_arg(const std::string& name) {
    try {
        return Activation::from_name(name);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

void emit(Ctx& ctx, const std::string& text, const std::string& path) {
    if (path.empty()) {
        ctx.out << text;
        return;
    }
    write_text_file(path, text);
    ctx.manifest.outputs.push_back(path);
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
    std::string name;
    std::string activation = "tanh";
    std::string y = "1,2,9,2";
    std::size_t probes = 0;
};

json verify_sd(const VerifyArgs& a, std::uint64_t seed, bool& ok) {
    const SDMinimumInstance inst = build_sd_minimum();
    const SDVerification v = verify_sd_minimum(inst, a.probes ? a.probes : 500, 1e-2, seed);
    const bool loss_exact = std::abs(v.loss - inst.reference_loss) <= 1e-12;
    json checks = {{"grad_zero", v.grad_zero},
                   {"hessian_psd", v.hessian_psd},
                   {"eigs_match", v.eigs_match},
                   {"loss_exact", loss_exact},
                   {"strict_probe_pass", v.strict_probe_pass},
                   {"better_point_exists", v.better_point_exists}};
    ok = v.all() && loss_exact;
    return {{"instance", "sd-minimum"},
            {"loss", v.loss},
            {"reference_loss", inst.reference_loss},
            {"better_loss", v.better_loss},
            {"stationary", to_json(v.report)},
            {"hessian", matrix_to_json(v.hessian)},
            {"checks", checks},
            {"verified", ok}};
}

json verify_ss(const VerifyArgs& a, std::uint64_t seed, bool& ok) {
    const auto y = parse_list(a.y, "--y");
    if (y.size() != 4) throw UsageError("--y: expected four values");
    const Activation act = activation_arg(a.activation);
    const SSValleyInstance inst = build_ss_valley(y[0], y[1], y[2], y[3], act);
    const double level = inst.valley_level();
    const double at_valley = ss_loss(inst, inst.valley_point);
    const double at_escape = ss_loss(inst, inst.escape_point);
    const SSProbeReport rep = probe_ss_valley(inst, a.probes ? a.probes : 10000, 1e-2, seed);
    json checks = {{"constraints_met", inst.constraints_met()},
                   {"valley_level_exact", std::abs(at_valley - level) <= 1e-12 * std::max(1.0, level)},
                   {"escape_below_level", at_escape < level},
                   {"probes_pass", rep.passed()}};
    ok = true;
    for (const auto& [k, v] : checks.items()) ok = ok && v.get<bool>();
    return {{"instance", "ss-valley"},
            {"activation", act.name()},
            {"y", y},
            {"constraint_violations", inst.constraint_violations},
            {"valley_point", inst.valley_point},
            {"valley_loss", at_valley},
            {"valley_level", level},
            {"escape_point", inst.escape_point},
            {"escape_loss", at_escape},
            {"probes", {{"count", rep.probes},
                        {"falsifications", rep.falsifications},
                        {"strict_checks", rep.strict_checks},
                        {"strictness_failures", rep.strictness_failures},
                        {"min_delta", rep.min_delta}}},
            {"checks", checks},
            {"verified", ok}};
}

json verify_cnn(const VerifyArgs& a, std::uint64_t seed, bool& ok) {
    const CNNSameValley inst = build_cnn_same_valley();
    json levels = json::array();
    bool exact = true, probes_ok = true;
    for (double s : {0.5, 1.0, 2.0}) {
        auto [u, w] = inst.valley_point(s);
        const double l = inst.loss(u, w);
        const CNNProbeReport rep = probe_cnn_same_valley(inst, s, a.probes ? a.probes : 500, derive_seed(seed, static_cast<std::uint64_t>(s * 4)));
        exact = exact && l == inst.valley_level();
        probes_ok = probes_ok && rep.passed();
        levels.push_back({{"a", s}, {"loss", l}, {"probes", rep.probes}, {"falsifications", rep.falsifications},
                          {"min_loss", rep.min_loss}});
    }
    auto [gu, gw] = inst.global_witness();
    const double gl = inst.loss(gu, gw);
    json checks = {{"valley_level_exact", exact}, {"probes_pass", probes_ok}, {"global_witness", gl < 1e-20}};
    ok = exact && probes_ok && gl < 1e-20;
    return {{"instance", "cnn-same-valley"}, {"valleys", levels}, {"global_witness_loss", gl},
            {"checks", checks},              {"verified", ok}};
}

int cmd_verify(Ctx& ctx, const VerifyArgs& a) {
    bool ok = false;
    json report;
    if (a.name == "sd-minimum") report = verify_sd(a, ctx.common.seed, ok);
    else if (a.name == "ss-valley") report = verify_ss(a, ctx.common.seed, ok);
    else if (a.name == "cnn-same-valley") report = verify_cnn(a, ctx.common.seed, ok);
    else throw UsageError("unknown instance '" + a.name + "' (expected sd-minimum, ss-valley or cnn-same-valley)");
    ctx.manifest.config = {{"instance", a.name}, {"activation", a.activation}, {"y", a.y}, {"probes", a.probes}};
    emit(ctx, report.dump(2) + "\n", ctx.common.out);
    if (!ctx.common.out.empty()) ctx.out << a.name << (ok ? " verified\n" : " NOT verified\n");
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string spec;
    std::string dims = "20,100,100,100,100,1";
    double sparsity = 0.15;
    std::string activation = "linear";
    std::size_t n = 100;
    double noise = 1.0;
    double a_norm = 5.0;
    double lr = 0.01;
    std::size_t epochs = 50000;
    double scale_init = 0.0;
    std::string init;
    std::string objective = "mse";
    std::size_t rank_every = 100;
};

int cmd_train(Ctx& ctx, const TrainArgs& a) {
    const std::uint64_t seed = ctx.common.seed;
    SparseNet net;
    double sparsity = 0.0;
    InitKind init = InitKind::default_uniform_fanin;
    if (!a.spec.empty()) {
        net = load_net(a.spec);
        init = InitKind::keep;
        sparsity = realized_sparsity(net);
    } else {
        std::vector<std::size_t> dims;
        for (double v : parse_list(a.dims, "--dims")) {
            if (v < 1 || v != std::floor(v)) throw UsageError("--dims: positive integers expected");
            dims.push_back(static_cast<std::size_t>(v));
        }
        if (!(a.sparsity >= 0.0 && a.sparsity < 1.0)) throw UsageError("--sparsity must be in [0, 1)");
        SparseNetDraw draw = random_sparse_net(dims, a.sparsity, activation_arg(a.activation), derive_seed(seed, 12));
        net = std::move(draw.net);
        sparsity = draw.sparsity;
    }
    if (a.scale_init > 0.0) init = InitKind::scaled;
    if (a.init == "default") init = InitKind::default_uniform_fanin;
    else if (a.init == "keep") init = InitKind::keep;
    else if (a.init == "scaled") init = InitKind::scaled;
    else if (!a.init.empty()) throw UsageError("--init must be default, scaled or keep");
    if (!(a.lr >= 0.0)) throw UsageError("--lr must be non-negative");

    const Dataset data = gen_synthetic(a.n, net.input_dim(), net.output_dim(), derive_seed(seed, 11), a.a_norm, a.noise);
    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.max_epochs = a.epochs;
    cfg.seed = seed;
    cfg.init = init;
    cfg.init_scale = a.scale_init > 0.0 ? a.scale_init : 1.0;
    cfg.rank_every = a.rank_every;
    if (a.objective == "mse") cfg.objective = Objective::mse;
    else if (a.objective == "half_sse") cfg.objective = Objective::half_sse;
    else throw UsageError("--objective must be mse or half_sse");

    const TrainTrace trace = gd_train(net, data, cfg);
    const std::size_t hidden = net.depth() - 1;
    if (!ctx.common.out.empty()) emit(ctx, train_trace_csv(trace, hidden), ctx.common.out);

    json summary = {{"stop", to_string(trace.stop)},
                    {"epochs", trace.epochs},
                    {"final_loss", trace.final_loss()},
                    {"final_grad_norm", trace.final_grad_norm},
                    {"realized_sparsity", sparsity},
                    {"parameters", net.parameter_count()}};
    if (net.activation().kind() == ActivationKind::linear) {
        const double opt = linear_optimum(cfg.objective, data.x, data.y);
        summary["optimum"] = opt;
        summary["gap"] = trace.final_loss() - opt;
    }
    double worst = 0.0;
    for (std::size_t e = 1; e < trace.losses.size(); ++e) worst = std::max(worst, trace.losses[e] - trace.losses[e - 1]);
    summary["monotone_violation"] = worst;

    ctx.manifest.config = {{"spec", a.spec},        {"dims", a.dims},       {"sparsity", a.sparsity},
                           {"activation", a.activation}, {"n", a.n},         {"noise", a.noise},
                           {"a_norm", a.a_norm},    {"lr", a.lr},           {"epochs", a.epochs},
                           {"init", to_string(init)}, {"scale_init", cfg.init_scale},
                           {"objective", a.objective}, {"rank_every", a.rank_every}};
    ctx.manifest.notes = summary;
    if (ctx.common.json) {
        ctx.out << summary.dump(2) << "\n";
    } else {
        ctx.out << "stop " << to_string(trace.stop) << " after " << trace.epochs << " epochs\n";
        ctx.out << "realized sparsity " << format_double(sparsity) << "\n";
        ctx.out << "final loss " << format_double(trace.final_loss()) << "\n";
        if (summary.contains("gap"))
            ctx.out << "optimum " << format_double(summary["optimum"].get<double>()) << "  gap "
                    << format_double(summary["gap"].get<double>()) << "\n";
    }
    return trace.stop == StopReason::diverged ? 1 : 0;
}

// ---------------------------------------------------------------------------
// trials

struct TrialsArgs {
    std::size_t n = 100;
    std::string activation = "tanh";
    std::string y = "1,2,6,2";
    double lr = 0.01;
    std::size_t epochs = 50000;
    double scale_init = 0.0;
    unsigned threads = 0;
};

int cmd_trials(Ctx& ctx, const TrialsArgs& a) {
    const auto y = parse_list(a.y, "--y");
    if (y.size() != 4) throw UsageError("--y: expected four values");
    const Activation act = activation_arg(a.activation);
    const SSValleyInstance inst = build_ss_valley(y[0], y[1], y[2], y[3], act);
    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.max_epochs = a.epochs;
    cfg.seed = ctx.common.seed;
    if (a.scale_init > 0.0) cfg.init = InitKind::scaled, cfg.init_scale = a.scale_init;
    const TrialStats stats = run_trials(ss_trial_problem(inst), a.n, cfg, a.threads);

    ctx.manifest.config = {{"n", a.n},   {"activation", act.name()}, {"y", y},
                           {"lr", a.lr}, {"epochs", a.epochs},       {"scale_init", a.scale_init}};
    const json j = to_json(stats);
    if (!ctx.common.out.empty()) emit(ctx, j.dump(2) + "\n", ctx.common.out);
    ctx.manifest.notes = {{"valley", stats.count(TrialClass::valley)},
                          {"escaped", stats.count(TrialClass::escaped)},
                          {"other", stats.count(TrialClass::other)},
                          {"clusters", stats.clusters.size()}};
    if (ctx.common.json) {
        ctx.out << (ctx.common.out.empty() ? j : ctx.manifest.notes).dump(2) << "\n";
        return 0;
    }
    ctx.out << act.name() << "  y = (" << a.y << ")  valley level " << format_double(inst.valley_level()) << "\n";
    ctx.out << "trials " << stats.n_trials << "  valley " << stats.count(TrialClass::valley) << "  escaped "
            << stats.count(TrialClass::escaped) << "  other " << stats.count(TrialClass::other) << "\n";
    ctx.out << "loss            count  class\n";
    for (const auto& c : stats.clusters) {
        std::ostringstream line;
        line << std::left << std::setw(16) << std::setprecision(8) << c.center << std::setw(7) << c.count
             << to_string(c.cls);
        ctx.out << line.str() << "\n";
    }
    if (!inst.constraints_met())
        for (const auto& v : inst.constraint_violations) ctx.out << "note: " << v << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// path

struct PathArgs {
    int cond = 1;
    std::size_t samples = 1000;
};

int cmd_path(Ctx& ctx, const PathArgs& a) {
    if (a.cond != 1 && a.cond != 3) throw UsageError("--cond must be 1 or 3");
    if (a.samples < 2) throw UsageError("--samples must be at least 2");
    const PathInstance inst = random_path_instance(a.cond, ctx.common.seed);
    const PathTrace trace = property_p_path(inst, a.samples);
    const bool ok = trace.monotone_violation <= 1e-10 && std::abs(trace.end_loss - trace.optimum) <= 1e-8;
    ctx.manifest.config = {{"cond", a.cond}, {"samples", a.samples}};
    json segs = json::array();
    for (const auto& s : trace.segments) segs.push_back({{"name", s.name}, {"t_begin", s.t_begin}, {"t_end", s.t_end}});
    json summary = {{"start_loss", trace.samples.front().loss}, {"end_loss", trace.end_loss},
                    {"optimum", trace.optimum},                 {"monotone_violation", trace.monotone_violation},
                    {"segments", segs},                         {"ok", ok}};
    ctx.manifest.notes = summary;
    if (!ctx.common.out.empty()) emit(ctx, path_csv(trace), ctx.common.out);
    if (ctx.common.json) ctx.out << summary.dump(2) << "\n";
    else if (ctx.common.out.empty()) ctx.out << path_csv(trace);
    else
        ctx.out << "loss " << format_double(trace.samples.front().loss) << " -> " << format_double(trace.end_loss)
                << "  optimum " << format_double(trace.optimum) << "  monotone violation "
                << format_double(trace.monotone_violation) << "\n";
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// prune

struct PruneArgs {
    std::string spec;
    bool allow_isolated = false;
};

int cmd_prune(Ctx& ctx, const PruneArgs& a) {
    const SparseNet net = load_net(a.spec);
    ctx.manifest.config = {{"spec", a.spec}, {"allow_isolated", a.allow_isolated}};
    ReductionResult red;
    try {
        red = effective_subnetwork(net, a.allow_isolated ? IsolationPolicy::report : IsolationPolicy::error);
    } catch (const std::runtime_error& e) {
        ctx.err << "prune: " << e.what() << "\n";
        red = reduce_connections(net);
        ctx.manifest.notes = to_json(red.report);
        if (ctx.common.json) ctx.out << to_json(red.report).dump(2) << "\n";
        return 1;
    }
    const json report = to_json(red.report);
    ctx.manifest.notes = report;
    if (!ctx.common.out.empty()) emit(ctx, net_to_json(red.net).dump(2) + "\n", ctx.common.out);
    if (ctx.common.json) {
        ctx.out << report.dump(2) << "\n";
    } else {
        ctx.out << "removed edges " << red.report.removed_edges.size() << "  removed biases "
                << red.report.removed_biases.size() << "  neutered neurons " << red.report.neutered_neurons.size()
                << "\n";
        ctx.out << "parameters " << net.parameter_count() << " -> " << red.net.parameter_count() << "\n";
        if (!red.report.effective()) ctx.out << "isolated inputs " << red.report.isolated_inputs.size()
                                             << "  isolated outputs " << red.report.isolated_outputs.size() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// rank

struct RankArgs {
    std::string spec;
    std::string activation = "tanh";
    std::size_t n = 8;
    double keep = 0.5;
};

int cmd_rank(Ctx& ctx, const RankArgs& a) {
    if (a.n == 0) throw UsageError("--n must be positive");
    SparseNet net;
    Matrix x;
    if (!a.spec.empty()) {
        net = load_net(a.spec);
        Rng rng(derive_seed(ctx.common.seed, 21));
        x = rng.normal_matrix(net.input_dim(), a.n);
    } else {
        if (!(a.keep > 0.0 && a.keep <= 1.0)) throw UsageError("--keep must be in (0, 1]");
        RankInstance ri = random_rank_instance(activation_arg(a.activation), a.n, ctx.common.seed, a.keep);
        net = std::move(ri.net);
        x = std::move(ri.x);
    }
    const auto ranks = hidden_rank_certificate(net, x);
    const AssumptionReport asm_rep = check_assumptions(x, net.layer(0).mask());
    const std::size_t target = std::min(a.n, net.layers().back().in_dim());
    const bool ok = !ranks.empty() && ranks.back() == target;
    ctx.manifest.config = {{"spec", a.spec}, {"activation", net.activation().name()}, {"n", a.n}, {"keep", a.keep}};
    json summary = {{"ranks", ranks}, {"target", target}, {"full_rank", ok},
                    {"assumptions_ok", asm_rep.ok()}, {"violations", asm_rep.violations}};
    ctx.manifest.notes = summary;
    if (!ctx.common.out.empty()) emit(ctx, summary.dump(2) + "\n", ctx.common.out);
    if (ctx.common.json) {
        ctx.out << summary.dump(2) << "\n";
    } else {
        ctx.out << "hidden ranks";
        for (auto r : ranks) ctx.out << " " << r;
        ctx.out << "  (target " << target << ")\n";
        for (const auto& v : asm_rep.violations) ctx.out << "assumption: " << v << "\n";
    }
    return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------
// conv-rank

struct ConvArgs {
    std::string mode = "SAME";
    std::size_t d = 4;
    std::string kernel = "0,3";
};

int cmd_conv_rank(Ctx& ctx, const ConvArgs& a) {
    ConvSpec spec;
    try {
        spec = {parse_list(a.kernel, "--kernel"), a.d, conv_mode_from_name(a.mode)};
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const std::size_t expected = conv_rank_expected(spec);
    const std::size_t numeric = numerical_rank(conv_matrix(spec));
    ctx.manifest.config = {{"mode", to_string(spec.mode)}, {"d", a.d}, {"kernel", spec.kernel}};
    json summary = {{"mode", to_string(spec.mode)}, {"d", a.d},           {"kernel", spec.kernel},
                    {"expected", expected},         {"numeric", numeric}, {"match", expected == numeric}};
    ctx.manifest.notes = summary;
    if (!ctx.common.out.empty()) emit(ctx, summary.dump(2) + "\n", ctx.common.out);
    if (ctx.common.json) ctx.out << summary.dump(2) << "\n";
    else ctx.out << "expected " << expected << ", numeric " << numeric << "\n";
    return expected == numeric ? 0 : 1;
}

// ---------------------------------------------------------------------------

std::vector<std::string> args_with_seed(const std::vector<std::string>& args, std::uint64_t seed) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--seed") {
            ++i;
            continue;
        }
        if (args[i].rfind("--seed=", 0) == 0) continue;
        out.push_back(args[i]);
    }
    out.push_back("--seed");
    out.push_back(std::to_string(seed));
    return out;
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
    const char* s = std::getenv("SEED");
    if (!s || !*s) return fallback;
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != std::strlen(s)) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw UsageError(std::string("SEED must be a non-negative integer, got '") + s + "'");
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, RunOptions opt) {
    CLI::App app{"Loss-landscape checks and training runs for sparse networks", "sparseland"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    Ctx ctx{out, err, {}, {}};
    VerifyArgs va;
    TrainArgs ta;
    TrialsArgs tr;
    PathArgs pa;
    PruneArgs pr;
    RankArgs ra;
    ConvArgs ca;
    std::string rerun_path;

    auto* verify = app.add_subcommand("verify", "check a counterexample instance");
    verify->add_option("instance", va.name, "sd-minimum, ss-valley or cnn-same-valley")->required();
    verify->add_option("--activation", va.activation, "activation for ss-valley");
    verify->add_option("--y", va.y, "ss-valley targets y1,y2,y3,y4");
    verify->add_option("--probes", va.probes, "number of perturbation probes");
    Common c_verify, c_train, c_trials, c_path, c_prune, c_rank, c_conv;
    add_common(verify, c_verify, 0);

    auto* train = app.add_subcommand("train", "gradient descent on a sparse net");
    train->add_option("--spec", ta.spec, "network JSON (weights are kept unless --init says otherwise)");
    train->add_option("--dims", ta.dims, "layer sizes for a generated net");
    train->add_option("--sparsity", ta.sparsity, "per-layer pruning rate for a generated net");
    train->add_option("--activation", ta.activation, "activation for a generated net");
    train->add_option("--n", ta.n, "samples");
    train->add_option("--noise", ta.noise, "target noise scale");
    train->add_option("--a-norm", ta.a_norm, "Frobenius norm of the target map");
    train->add_option("--lr", ta.lr, "learning rate");
    train->add_option("--epochs", ta.epochs, "maximum epochs");
    train->add_option("--scale-init", ta.scale_init, "multiply the default initialization");
    train->add_option("--init", ta.init, "default, scaled or keep");
    train->add_option("--objective", ta.objective, "mse or half_sse");
    train->add_option("--rank-every", ta.rank_every, "rank sampling period (0 disables)");
    add_common(train, c_train, 0);

    auto* trials = app.add_subcommand("trials", "repeated training on the sparse-sparse valley instance");
    trials->add_option("--n", tr.n, "number of trials");
    trials->add_option("--activation", tr.activation, "activation");
    trials->add_option("--y", tr.y, "targets y1,y2,y3,y4");
    trials->add_option("--lr", tr.lr, "learning rate");
    trials->add_option("--epochs", tr.epochs, "maximum epochs per trial");
    trials->add_option("--scale-init", tr.scale_init, "multiply the default initialization");
    trials->add_option("--threads", tr.threads, "worker threads (0 = hardware)");
    add_common(trials, c_trials, 1000);

    auto* path = app.add_subcommand("path", "non-increasing path to the optimum on a random instance");
    path->add_option("--cond", pa.cond, "1 (p_i >= d_i) or 3 (scalar output)");
    path->add_option("--samples", pa.samples, "grid points");
    add_common(path, c_path, 0);

    auto* prune = app.add_subcommand("prune", "reduce a net to its effective subnetwork");
    prune->add_option("--spec", pr.spec, "network JSON")->required();
    prune->add_flag("--allow-isolated", pr.allow_isolated, "report isolated inputs/outputs instead of failing");
    add_common(prune, c_prune, 0);

    auto* rank = app.add_subcommand("rank", "numerical rank of hidden-layer outputs");
    rank->add_option("--spec", ra.spec, "network JSON (random square instance otherwise)");
    rank->add_option("--activation", ra.activation, "activation for the random instance");
    rank->add_option("--n", ra.n, "samples (and width of the random instance)");
    rank->add_option("--keep", ra.keep, "mask keep probability for the random instance");
    add_common(rank, c_rank, 0);

    auto* conv = app.add_subcommand("conv-rank", "closed-form vs numerical rank of a conv matrix");
    conv->add_option("--mode", ca.mode, "FULL, SAME or VALID");
    conv->add_option("--d", ca.d, "input length");
    conv->add_option("--kernel", ca.kernel, "kernel taps, comma separated");
    add_common(conv, c_conv, 0);

    auto* rerun = app.add_subcommand("rerun", "replay the command recorded in a manifest");
    rerun->add_option("manifest", rerun_path, "manifest JSON")->required();

    std::vector<const char*> argv{"sparseland"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    if (rerun->parsed()) {
        try {
            const RunManifest m = manifest_from_json(parse_json_text(read_text_file(rerun_path)));
            if (m.version != kToolVersion)
                err << "warning: manifest written by version " << m.version << ", running " << kToolVersion << "\n";
            return run(m.args, out, err, RunOptions{false});
        } catch (const SpecError& e) {
            err << "error: " << e.what() << "\n";
            return 2;
        } catch (const json::exception& e) {
            err << "error: " << rerun_path << ": " << e.what() << "\n";
            return 2;
        }
    }

    CLI::App* sub = app.get_subcommands().front();
    Common* common = sub == verify ? &c_verify
                   : sub == train  ? &c_train
                   : sub == trials ? &c_trials
                   : sub == path   ? &c_path
                   : sub == prune  ? &c_prune
                   : sub == rank   ? &c_rank
                                   : &c_conv;
    int code = 2;
    try {
        if (opt.honor_seed_env) common->seed = seed_from_env(common->seed);
        ctx.common = *common;
        ctx.manifest.command = sub->get_name();
        ctx.manifest.seed = common->seed;
        ctx.manifest.args = args_with_seed(args, common->seed);
        if (sub == verify) code = cmd_verify(ctx, va);
        else if (sub == train) code = cmd_train(ctx, ta);
        else if (sub == trials) code = cmd_trials(ctx, tr);
        else if (sub == path) code = cmd_path(ctx, pa);
        else if (sub == prune) code = cmd_prune(ctx, pr);
        else if (sub == rank) code = cmd_rank(ctx, ra);
        else code = cmd_conv_rank(ctx, ca);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const SpecError& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        code = 1;
    }

    ctx.manifest.exit_code = code;
    std::string mpath = ctx.common.manifest;
    if (mpath.empty())
        mpath = ctx.common.out.empty() ? "sparseland-" + ctx.manifest.command + ".manifest.json"
                                       : ctx.common.out + ".manifest.json";
    try {
        write_text_file(mpath, to_json(ctx.manifest).dump(2) + "\n");
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return code == 0 ? 1 : code;
    }
    return code;
}

}  // namespace sparseland::cli
