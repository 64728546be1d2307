#pragma once

// File formats: network specs and reports as JSON (nlohmann::json), traces
// as CSV, and the run manifest written next to every CLI output.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparseland/calculus.hpp"
#include "sparseland/landscape.hpp"
#include "sparseland/net_core.hpp"
#include "sparseland/trainer.hpp"

namespace sparseland {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Malformed input; `where` is a JSON pointer or "line N".
class SpecError : public std::runtime_error {
public:
    SpecError(const std::string& where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(where) {}
    const std::string& where() const noexcept { return where_; }

private:
    std::string where_;
};

namespace detail {

inline double parse_rational(const std::string& s, const std::string& where) {
    const auto slash = s.find('/');
    try {
        std::size_t used = 0;
        if (slash == std::string::npos) {
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        }
        const std::string num = s.substr(0, slash), den = s.substr(slash + 1);
        const double a = std::stod(num, &used);
        if (used != num.size()) throw std::invalid_argument(s);
        const double b = std::stod(den, &used);
        if (used != den.size() || b == 0.0) throw std::invalid_argument(s);
        return a / b;
    } catch (const std::logic_error&) {
        throw SpecError(where, "cannot read number '" + s + "'");
    }
}

}  // namespace detail

/// A number, or a string such as "7/8" or "0.25".
inline double read_number(const json& j, const std::string& where) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return detail::parse_rational(j.get<std::string>(), where);
    throw SpecError(where, "expected a number");
}

template <typename T>
inline basic_matrix<T> read_matrix(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) throw SpecError(where, "expected a non-empty array of rows");
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    basic_matrix<T> m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const std::string rw = where + "/" + std::to_string(r);
        if (!j[r].is_array() || j[r].size() != cols) throw SpecError(rw, "rows must be arrays of equal length");
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = read_number(j[r][c], rw + "/" + std::to_string(c));
            if constexpr (std::is_same_v<T, std::uint8_t>) {
                if (v != 0.0 && v != 1.0) throw SpecError(rw + "/" + std::to_string(c), "mask entries must be 0 or 1");
                m(r, c) = static_cast<std::uint8_t>(v);
            } else {
                m(r, c) = v;
            }
        }
    }
    return m;
}

inline json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
    return rows;
}

inline json mask_to_json(const Mask& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (auto v : m.row(r)) row.push_back(static_cast<int>(v));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline json activation_to_json(const Activation& a) {
    json params = json::object();
    switch (a.kind()) {
        case ActivationKind::leaky_relu: params["slope"] = a.parameter(); break;
        case ActivationKind::elu: params["alpha"] = a.parameter(); break;
        case ActivationKind::polynomial: params["coeffs"] = a.coefficients(); break;
        default: break;
    }
    return {{"kind", a.name()}, {"params", params}};
}

inline Activation activation_from_json(const json& j, const std::string& where = "/activation") {
    if (j.is_string()) {
        try {
            return Activation::from_name(j.get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw SpecError(where, e.what());
        }
    }
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
        throw SpecError(where, "expected {kind, params}");
    const std::string kind = j["kind"].get<std::string>();
    const json params = j.value("params", json::object());
    if (kind == "leaky_relu") return Activation::leaky_relu(params.contains("slope") ? read_number(params["slope"], where + "/params/slope") : 0.01);
    if (kind == "elu") return Activation::elu(params.contains("alpha") ? read_number(params["alpha"], where + "/params/alpha") : 1.0);
    if (kind == "polynomial") {
        if (!params.contains("coeffs") || !params["coeffs"].is_array())
            throw SpecError(where + "/params", "polynomial needs coeffs");
        std::vector<double> c;
        for (std::size_t i = 0; i < params["coeffs"].size(); ++i)
            c.push_back(read_number(params["coeffs"][i], where + "/params/coeffs/" + std::to_string(i)));
        try {
            return Activation::polynomial(std::move(c));
        } catch (const std::invalid_argument& e) {
            throw SpecError(where + "/params/coeffs", e.what());
        }
    }
    try {
        return Activation::from_name(kind);
    } catch (const std::invalid_argument& e) {
        throw SpecError(where + "/kind", e.what());
    }
}

inline json net_to_json(const SparseNet& net) {
    json layers = json::array();
    for (const auto& l : net.layers()) {
        json jl = {{"weights", matrix_to_json(l.weights())}, {"mask", mask_to_json(l.mask())}};
        if (l.bias()) {
            jl["bias"] = *l.bias();
            json bm = json::array();
            for (auto v : l.bias_mask()) bm.push_back(static_cast<int>(v));
            jl["bias_mask"] = bm;
        }
        layers.push_back(std::move(jl));
    }
    return {{"layers", layers}, {"activation", activation_to_json(net.activation())}};
}

inline SparseNet net_from_json(const json& j) {
    if (!j.is_object()) throw SpecError("/", "expected an object");
    if (!j.contains("layers") || !j["layers"].is_array()) throw SpecError("/layers", "missing layer list");
    std::vector<SparseLayer> layers;
    for (std::size_t k = 0; k < j["layers"].size(); ++k) {
        const std::string w = "/layers/" + std::to_string(k);
        const json& jl = j["layers"][k];
        if (!jl.is_object() || !jl.contains("weights")) throw SpecError(w, "layer needs weights");
        Matrix weights = read_matrix<double>(jl["weights"], w + "/weights");
        Mask mask = jl.contains("mask") ? read_matrix<std::uint8_t>(jl["mask"], w + "/mask")
                                        : Mask(weights.rows(), weights.cols(), 1);
        std::optional<Vector> bias;
        std::vector<std::uint8_t> bias_mask;
        if (jl.contains("bias")) {
            if (!jl["bias"].is_array()) throw SpecError(w + "/bias", "expected an array");
            Vector b;
            for (std::size_t i = 0; i < jl["bias"].size(); ++i)
                b.push_back(read_number(jl["bias"][i], w + "/bias/" + std::to_string(i)));
            bias = std::move(b);
        }
        if (jl.contains("bias_mask")) {
            if (!jl["bias_mask"].is_array()) throw SpecError(w + "/bias_mask", "expected an array");
            for (std::size_t i = 0; i < jl["bias_mask"].size(); ++i) {
                const double v = read_number(jl["bias_mask"][i], w + "/bias_mask/" + std::to_string(i));
                if (v != 0.0 && v != 1.0) throw SpecError(w + "/bias_mask/" + std::to_string(i), "must be 0 or 1");
                bias_mask.push_back(static_cast<std::uint8_t>(v));
            }
        }
        try {
            layers.emplace_back(std::move(weights), std::move(mask), std::move(bias), std::move(bias_mask));
        } catch (const std::invalid_argument& e) {
            throw SpecError(w, e.what());
        }
    }
    const Activation act = j.contains("activation") ? activation_from_json(j["activation"]) : Activation::linear();
    try {
        return SparseNet(std::move(layers), act);
    } catch (const std::invalid_argument& e) {
        throw SpecError("/layers", e.what());
    }
}

/// Parses JSON text; syntax errors are reported with their line number.
inline json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        for (std::size_t i = 0; i < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++i)
            line += text[i] == '\n';
        throw SpecError("line " + std::to_string(line), e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError(path, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline SparseNet load_net(const std::string& path) { return net_from_json(parse_json_text(read_text_file(path))); }

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const StationaryReport& r) {
    json nb = json::array();
    for (const auto& v : r.null_basis) nb.push_back(v);
    return {{"grad_norm", r.grad_norm},
            {"eigenvalues", r.eigenvalues},
            {"null_basis", nb},
            {"min_probe", to_string(r.verdict)},
            {"probe_evidence", r.probe_evidence},
            {"probes_run", r.probes_run}};
}

inline MinVerdict verdict_from_string(const std::string& s) {
    for (auto v : {MinVerdict::strict_local_min, MinVerdict::local_min_nonstrict, MinVerdict::saddle,
                   MinVerdict::inconclusive})
        if (s == to_string(v)) return v;
    throw SpecError("/min_probe", "unknown verdict '" + s + "'");
}

inline StationaryReport stationary_report_from_json(const json& j) {
    StationaryReport r;
    r.grad_norm = j.at("grad_norm").get<double>();
    r.eigenvalues = j.at("eigenvalues").get<Vector>();
    for (const auto& v : j.at("null_basis")) r.null_basis.push_back(v.get<Vector>());
    r.verdict = verdict_from_string(j.at("min_probe").get<std::string>());
    r.probe_evidence = j.at("probe_evidence").get<double>();
    r.probes_run = j.at("probes_run").get<std::size_t>();
    return r;
}

inline json to_json(const ConditionReport& r) {
    return {{"cond_overparam", r.cond_overparam}, {"cond_orthogonal", r.cond_orthogonal},
            {"cond_scalar", r.cond_scalar},       {"width_vs_n", r.width_vs_n},
            {"fanin_ok", r.fanin_ok},             {"widths", r.widths},
            {"support_sizes", r.support_sizes},   {"intrinsic_dims", r.intrinsic_dims},
            {"intrinsic_ok", r.intrinsic_ok}};
}

inline ConditionReport condition_report_from_json(const json& j) {
    ConditionReport r;
    r.cond_overparam = j.at("cond_overparam").get<bool>();
    r.cond_orthogonal = j.at("cond_orthogonal").get<bool>();
    r.cond_scalar = j.at("cond_scalar").get<bool>();
    r.width_vs_n = j.at("width_vs_n").get<bool>();
    r.fanin_ok = j.at("fanin_ok").get<bool>();
    r.widths = j.at("widths").get<std::vector<std::size_t>>();
    r.support_sizes = j.at("support_sizes").get<std::vector<std::size_t>>();
    r.intrinsic_dims = j.at("intrinsic_dims").get<std::vector<std::size_t>>();
    r.intrinsic_ok = j.at("intrinsic_ok").get<bool>();
    return r;
}

inline json to_json(const RemovalReport& r) {
    json edges = json::array();
    for (const auto& e : r.removed_edges) edges.push_back({{"layer", e.layer}, {"row", e.row}, {"col", e.col}});
    auto neurons = [](const std::vector<NeuronId>& v) {
        json a = json::array();
        for (const auto& n : v) a.push_back({{"level", n.level}, {"index", n.index}});
        return a;
    };
    return {{"removed_edges", edges},
            {"removed_biases", neurons(r.removed_biases)},
            {"neutered_neurons", neurons(r.neutered_neurons)},
            {"isolated_inputs", r.isolated_inputs},
            {"isolated_outputs", r.isolated_outputs}};
}

inline TrialClass trial_class_from_string(const std::string& s) {
    for (auto c : {TrialClass::valley, TrialClass::escaped, TrialClass::other})
        if (s == to_string(c)) return c;
    throw SpecError("/classification", "unknown class '" + s + "'");
}

inline StopReason stop_reason_from_string(const std::string& s) {
    for (auto r : {StopReason::converged_grad, StopReason::converged_plateau, StopReason::max_epochs,
                   StopReason::diverged})
        if (s == to_string(r)) return r;
    throw SpecError("/stop", "unknown stop reason '" + s + "'");
}

inline json to_json(const TrialStats& s) {
    json trials = json::array();
    for (const auto& t : s.trials)
        trials.push_back({{"index", t.index},
                          {"seed", t.seed},
                          {"final_loss", t.final_loss},
                          {"epochs", t.epochs},
                          {"stop", to_string(t.stop)},
                          {"classification", to_string(t.cls)}});
    json clusters = json::array();
    for (const auto& c : s.clusters)
        clusters.push_back({{"center", c.center}, {"count", c.count}, {"classification", to_string(c.cls)}});
    return {{"n_trials", s.n_trials}, {"trials", trials}, {"clusters", clusters}};
}

inline TrialStats trial_stats_from_json(const json& j) {
    TrialStats s;
    s.n_trials = j.at("n_trials").get<std::size_t>();
    for (const auto& t : j.at("trials")) {
        TrialResult r;
        r.index = t.at("index").get<std::size_t>();
        r.seed = t.at("seed").get<std::uint64_t>();
        r.final_loss = t.at("final_loss").get<double>();
        r.epochs = t.at("epochs").get<std::size_t>();
        r.stop = stop_reason_from_string(t.at("stop").get<std::string>());
        r.cls = trial_class_from_string(t.at("classification").get<std::string>());
        s.trials.push_back(r);
    }
    for (const auto& c : j.at("clusters"))
        s.clusters.push_back({c.at("center").get<double>(), c.at("count").get<std::size_t>(),
                              trial_class_from_string(c.at("classification").get<std::string>())});
    return s;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string path_csv(const PathTrace& trace) {
    std::string out = "t,loss\n";
    for (const auto& s : trace.samples) out += format_double(s.t) + "," + format_double(s.loss) + "\n";
    return out;
}

/// epoch, loss, rank_layer_1..L; rank cells are empty on epochs without a
/// rank sample.
inline std::string train_trace_csv(const TrainTrace& trace, std::size_t hidden_layers) {
    std::string out = "epoch,loss";
    for (std::size_t k = 1; k <= hidden_layers; ++k) out += ",rank_layer_" + std::to_string(k);
    out += "\n";
    std::size_t next_rank = 0;
    for (std::size_t e = 0; e < trace.losses.size(); ++e) {
        out += std::to_string(e) + "," + format_double(trace.losses[e]);
        const bool has = next_rank < trace.ranks.size() && trace.ranks[next_rank].epoch == e;
        for (std::size_t k = 0; k < hidden_layers; ++k) {
            out += ",";
            if (has && k < trace.ranks[next_rank].ranks.size()) out += std::to_string(trace.ranks[next_rank].ranks[k]);
        }
        if (has) ++next_rank;
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run manifest

struct RunManifest {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    std::string version = kToolVersion;
    std::vector<std::string> outputs;
    std::vector<std::string> args;  // argv after the program name, seed made explicit
    int exit_code = 0;
    json notes = json::object();

    friend bool operator==(const RunManifest&, const RunManifest&) = default;
};

inline json to_json(const RunManifest& m) {
    return {{"command", m.command}, {"config", m.config},   {"seed", m.seed},
            {"version", m.version}, {"outputs", m.outputs}, {"args", m.args},
            {"exit_code", m.exit_code}, {"notes", m.notes}};
}

inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.version = j.at("version").get<std::string>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.args = j.value("args", std::vector<std::string>{});
    m.exit_code = j.value("exit_code", 0);
    m.notes = j.value("notes", json::object());
    return m;
}

}  // namespace sparseland
