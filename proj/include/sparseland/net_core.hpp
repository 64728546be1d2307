#pragma once

// Masked feed-forward networks: layers with binary masks, the grouping of
// first-layer rows by mask pattern, forward evaluation with the squared
// loss, backpropagated gradients, and reduction to the effective
// sub-network (connections lying on some input-to-output path).

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sparseland/activation.hpp"
#include "sparseland/linalg.hpp"

namespace sparseland {

class SparseLayer {
public:
    SparseLayer() = default;

    /// Validates that every masked weight (and masked bias) is exactly zero.
    SparseLayer(Matrix weights, Mask mask, std::optional<Vector> bias = std::nullopt,
                std::vector<std::uint8_t> bias_mask = {})
        : weights_(std::move(weights)), mask_(std::move(mask)), bias_(std::move(bias)),
          bias_mask_(std::move(bias_mask)) {
        require_same_shape(weights_, mask_, "SparseLayer");
        for (std::size_t r = 0; r < weights_.rows(); ++r) {
            for (std::size_t c = 0; c < weights_.cols(); ++c) {
                const auto m = mask_(r, c);
                if (m > 1) throw std::invalid_argument("SparseLayer: mask entries must be 0 or 1");
                if (m == 0 && weights_(r, c) != 0.0) {
                    throw std::invalid_argument("SparseLayer: weight (" + std::to_string(r) + "," +
                                                std::to_string(c) + ") is nonzero but masked");
                }
            }
        }
        if (bias_) {
            if (bias_->size() != weights_.rows())
                throw std::invalid_argument("SparseLayer: bias length differs from output dimension");
            if (bias_mask_.empty()) bias_mask_.assign(bias_->size(), 1);
            if (bias_mask_.size() != bias_->size())
                throw std::invalid_argument("SparseLayer: bias mask length differs from bias length");
            for (std::size_t r = 0; r < bias_->size(); ++r) {
                if (bias_mask_[r] > 1) throw std::invalid_argument("SparseLayer: bias mask entries must be 0 or 1");
                if (bias_mask_[r] == 0 && (*bias_)[r] != 0.0)
                    throw std::invalid_argument("SparseLayer: bias " + std::to_string(r) + " is nonzero but masked");
            }
        } else if (!bias_mask_.empty()) {
            throw std::invalid_argument("SparseLayer: bias mask given without a bias");
        }
    }

    /// Zeroes the masked entries of `weights` before construction.
    static SparseLayer masked(Matrix weights, Mask mask) {
        require_same_shape(weights, mask, "SparseLayer::masked");
        for (std::size_t i = 0; i < weights.size(); ++i)
            if (mask.values()[i] == 0) weights.values()[i] = 0.0;
        return SparseLayer(std::move(weights), std::move(mask));
    }

    static SparseLayer dense(Matrix weights) {
        Mask mask(weights.rows(), weights.cols(), 1);
        return SparseLayer(std::move(weights), std::move(mask));
    }

    std::size_t in_dim() const noexcept { return weights_.cols(); }
    std::size_t out_dim() const noexcept { return weights_.rows(); }
    const Matrix& weights() const noexcept { return weights_; }
    const Mask& mask() const noexcept { return mask_; }
    const std::optional<Vector>& bias() const noexcept { return bias_; }
    const std::vector<std::uint8_t>& bias_mask() const noexcept { return bias_mask_; }
    bool has_bias(std::size_t row) const { return bias_ && bias_mask_[row] != 0; }

    std::size_t unmasked_count() const {
        std::size_t n = 0;
        for (auto m : mask_.values()) n += m;
        for (auto m : bias_mask_) n += m;
        return n;
    }

    /// Subtracts `delta` on unmasked coordinates only; pruned entries never move.
    void step(const Matrix& weight_delta, const Vector* bias_delta = nullptr) {
        require_same_shape(weights_, weight_delta, "SparseLayer::step");
        for (std::size_t i = 0; i < weights_.size(); ++i)
            if (mask_.values()[i]) weights_.values()[i] -= weight_delta.values()[i];
        if (bias_ && bias_delta) {
            for (std::size_t r = 0; r < bias_->size(); ++r)
                if (bias_mask_[r]) (*bias_)[r] -= (*bias_delta)[r];
        }
    }

    /// Sets a single unmasked weight; masked coordinates are rejected.
    void set_weight(std::size_t r, std::size_t c, double value) {
        if (!mask_(r, c)) throw std::invalid_argument("SparseLayer: cannot set a masked weight");
        weights_(r, c) = value;
    }

    void set_bias(std::size_t r, double value) {
        if (!has_bias(r)) throw std::invalid_argument("SparseLayer: cannot set a masked bias");
        (*bias_)[r] = value;
    }

    /// Removes a connection: mask and weight both become zero.
    void prune(std::size_t r, std::size_t c) {
        mask_(r, c) = 0;
        weights_(r, c) = 0.0;
    }

    void prune_bias(std::size_t r) {
        if (!bias_) return;
        bias_mask_[r] = 0;
        (*bias_)[r] = 0.0;
    }

    friend bool operator==(const SparseLayer&, const SparseLayer&) = default;

private:
    Matrix weights_;
    Mask mask_;
    std::optional<Vector> bias_;
    std::vector<std::uint8_t> bias_mask_;
};

/// Layers applied in order; every layer but the last is followed by the
/// shared hidden activation, the last is linear.
class SparseNet {
public:
    SparseNet() = default;
    SparseNet(std::vector<SparseLayer> layers, Activation hidden_activation)
        : layers_(std::move(layers)), activation_(std::move(hidden_activation)) {
        if (layers_.size() < 2) throw std::invalid_argument("SparseNet: at least two layers are required");
        for (std::size_t k = 0; k + 1 < layers_.size(); ++k) {
            if (layers_[k].out_dim() != layers_[k + 1].in_dim()) {
                throw std::invalid_argument("SparseNet: layer " + std::to_string(k) + " outputs " +
                                            std::to_string(layers_[k].out_dim()) + " but layer " +
                                            std::to_string(k + 1) + " expects " +
                                            std::to_string(layers_[k + 1].in_dim()));
            }
        }
    }

    const std::vector<SparseLayer>& layers() const noexcept { return layers_; }
    std::vector<SparseLayer>& mutable_layers() noexcept { return layers_; }
    const SparseLayer& layer(std::size_t k) const { return layers_.at(k); }
    const Activation& activation() const noexcept { return activation_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.unmasked_count();
        return n;
    }

    friend bool operator==(const SparseNet&, const SparseNet&) = default;

private:
    std::vector<SparseLayer> layers_;
    Activation activation_;
};

// ---------------------------------------------------------------------------
// Pattern decomposition

struct PatternDecomposition {
    std::vector<std::vector<std::uint8_t>> patterns;  // distinct mask rows, first-occurrence order
    std::vector<std::vector<std::size_t>> groups;      // hidden rows sharing each pattern
    std::vector<std::vector<std::size_t>> supports;    // input coordinates where the pattern is 1
    std::vector<Matrix> data_slices;                   // rows of X on each support

    std::size_t pattern_count() const noexcept { return patterns.size(); }
    std::size_t width(std::size_t i) const { return groups.at(i).size(); }
    std::size_t support_size(std::size_t i) const { return supports.at(i).size(); }
    std::size_t total_width() const {
        std::size_t p = 0;
        for (const auto& g : groups) p += g.size();
        return p;
    }
};

/// Groups the rows of `layer` by identical mask pattern. Bias entries are
/// not part of the pattern.
inline PatternDecomposition decompose_patterns(const SparseLayer& layer, const Matrix& x) {
    if (x.rows() != layer.in_dim()) {
        throw std::invalid_argument("decompose_patterns: data has " + std::to_string(x.rows()) +
                                    " rows but the layer expects " + std::to_string(layer.in_dim()));
    }
    PatternDecomposition out;
    std::map<std::vector<std::uint8_t>, std::size_t> index;
    const Mask& mask = layer.mask();
    for (std::size_t r = 0; r < mask.rows(); ++r) {
        std::vector<std::uint8_t> pattern(mask.row(r).begin(), mask.row(r).end());
        bool any = false;
        for (auto v : pattern) any = any || v != 0;
        if (!any) throw std::invalid_argument("ineffective hidden neuron " + std::to_string(r));
        auto [it, inserted] = index.try_emplace(pattern, out.patterns.size());
        if (inserted) {
            std::vector<std::size_t> support;
            for (std::size_t c = 0; c < pattern.size(); ++c)
                if (pattern[c]) support.push_back(c);
            out.data_slices.push_back(select_rows(x, support));
            out.supports.push_back(std::move(support));
            out.patterns.push_back(std::move(pattern));
            out.groups.emplace_back();
        }
        out.groups[it->second].push_back(r);
    }
    return out;
}

/// Per-pattern first-layer blocks W_i (p_i x d_i).
inline std::vector<Matrix> group_weights(const SparseLayer& layer, const PatternDecomposition& d) {
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < d.pattern_count(); ++i) {
        Matrix w = select_rows(layer.weights(), d.groups[i]);
        out.push_back(select_cols(w, d.supports[i]));
    }
    return out;
}

/// Per-pattern second-layer blocks U_i (d_y x p_i).
inline std::vector<Matrix> group_output_weights(const Matrix& u, const PatternDecomposition& d) {
    std::vector<Matrix> out;
    for (const auto& g : d.groups) out.push_back(select_cols(u, g));
    return out;
}

/// Scatters per-pattern blocks back into a full first-layer weight matrix.
inline Matrix scatter_group_weights(const PatternDecomposition& d, const std::vector<Matrix>& blocks,
                                    std::size_t rows, std::size_t cols) {
    Matrix w(rows, cols);
    for (std::size_t i = 0; i < d.pattern_count(); ++i)
        for (std::size_t a = 0; a < d.groups[i].size(); ++a)
            for (std::size_t b = 0; b < d.supports[i].size(); ++b) w(d.groups[i][a], d.supports[i][b]) = blocks[i](a, b);
    return w;
}

inline Matrix scatter_group_output_weights(const PatternDecomposition& d, const std::vector<Matrix>& blocks,
                                           std::size_t out_rows, std::size_t width) {
    Matrix u(out_rows, width);
    for (std::size_t i = 0; i < d.pattern_count(); ++i)
        for (std::size_t r = 0; r < out_rows; ++r)
            for (std::size_t a = 0; a < d.groups[i].size(); ++a) u(r, d.groups[i][a]) = blocks[i](r, a);
    return u;
}

/// sum_i U_i W_i Z_i, the block-diagonal form of a linear two-layer output.
inline Matrix pattern_output(const std::vector<Matrix>& u_blocks, const std::vector<Matrix>& w_blocks,
                             const std::vector<Matrix>& z_blocks) {
    if (u_blocks.size() != w_blocks.size() || w_blocks.size() != z_blocks.size() || u_blocks.empty())
        throw std::invalid_argument("pattern_output: block lists differ in length");
    Matrix out = u_blocks[0] * (w_blocks[0] * z_blocks[0]);
    for (std::size_t i = 1; i < u_blocks.size(); ++i) out = out + u_blocks[i] * (w_blocks[i] * z_blocks[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Effective sub-network

struct EdgeId {
    std::size_t layer;  // index of the weight matrix
    std::size_t row;    // destination neuron
    std::size_t col;    // source neuron
    friend bool operator==(const EdgeId&, const EdgeId&) = default;
    friend auto operator<=>(const EdgeId&, const EdgeId&) = default;
};

struct NeuronId {
    std::size_t level;  // 0 = inputs, depth = outputs
    std::size_t index;
    friend bool operator==(const NeuronId&, const NeuronId&) = default;
    friend auto operator<=>(const NeuronId&, const NeuronId&) = default;
};

struct RemovalReport {
    std::vector<EdgeId> removed_edges;
    std::vector<NeuronId> removed_biases;  // level = layer + 1
    std::vector<NeuronId> neutered_neurons;
    std::vector<std::size_t> isolated_inputs;
    std::vector<std::size_t> isolated_outputs;

    bool empty() const {
        return removed_edges.empty() && removed_biases.empty() && neutered_neurons.empty();
    }
    bool effective() const { return isolated_inputs.empty() && isolated_outputs.empty(); }
};

struct ReductionResult {
    SparseNet net;
    RemovalReport report;
};

/// Fixed point of the useless-connection rules: keeps exactly the edges on
/// some input-to-output path. A hidden neuron carrying an unmasked bias
/// counts as a source, and so does every hidden neuron when sigma(0) != 0,
/// since both emit a constant that reaches the output. Never throws on
/// isolation; the report records it.
inline ReductionResult reduce_connections(const SparseNet& net) {
    const std::size_t depth = net.depth();
    const bool constant_hidden = net.activation()(0.0) != 0.0;

    std::vector<std::vector<char>> fwd(depth + 1), bwd(depth + 1);
    fwd[0].assign(net.input_dim(), 1);
    for (std::size_t k = 0; k < depth; ++k) {
        const SparseLayer& l = net.layer(k);
        const bool hidden = k + 1 < depth;
        fwd[k + 1].assign(l.out_dim(), 0);
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            bool live = hidden && (constant_hidden || l.has_bias(r));
            for (std::size_t c = 0; c < l.in_dim() && !live; ++c) live = l.mask()(r, c) && fwd[k][c];
            fwd[k + 1][r] = live;
        }
    }
    bwd[depth].assign(net.output_dim(), 1);
    for (std::size_t k = depth; k-- > 0;) {
        const SparseLayer& l = net.layer(k);
        bwd[k].assign(l.in_dim(), 0);
        for (std::size_t c = 0; c < l.in_dim(); ++c) {
            bool live = false;
            for (std::size_t r = 0; r < l.out_dim() && !live; ++r) live = l.mask()(r, c) && bwd[k + 1][r];
            bwd[k][c] = live;
        }
    }

    SparseNet reduced = net;
    RemovalReport report;
    auto& layers = reduced.mutable_layers();
    for (std::size_t k = 0; k < depth; ++k) {
        SparseLayer& l = layers[k];
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            for (std::size_t c = 0; c < l.in_dim(); ++c) {
                if (l.mask()(r, c) && !(fwd[k][c] && bwd[k + 1][r])) {
                    l.prune(r, c);
                    report.removed_edges.push_back({k, r, c});
                }
            }
            if (l.has_bias(r) && !bwd[k + 1][r]) {
                l.prune_bias(r);
                report.removed_biases.push_back({k + 1, r});
            }
        }
    }
    // a dead neuron is reported only if it still carried an edge or a bias
    for (std::size_t level = 1; level < depth; ++level) {
        const SparseLayer& in = net.layer(level - 1);
        const SparseLayer& out = net.layer(level);
        for (std::size_t j = 0; j < fwd[level].size(); ++j) {
            if (fwd[level][j] && bwd[level][j]) continue;
            bool attached = in.has_bias(j);
            for (std::size_t c = 0; c < in.in_dim() && !attached; ++c) attached = in.mask()(j, c);
            for (std::size_t r = 0; r < out.out_dim() && !attached; ++r) attached = out.mask()(r, j);
            if (attached) report.neutered_neurons.push_back({level, j});
        }
    }

    const SparseLayer& first = layers.front();
    for (std::size_t c = 0; c < first.in_dim(); ++c) {
        bool used = false;
        for (std::size_t r = 0; r < first.out_dim() && !used; ++r) used = first.mask()(r, c);
        if (!used) report.isolated_inputs.push_back(c);
    }
    const SparseLayer& last = layers.back();
    for (std::size_t r = 0; r < last.out_dim(); ++r) {
        bool fed = false;
        for (std::size_t c = 0; c < last.in_dim() && !fed; ++c) fed = last.mask()(r, c);
        if (!fed) report.isolated_outputs.push_back(r);
    }
    return {std::move(reduced), std::move(report)};
}

enum class IsolationPolicy { error, report };

/// Reduces `net` to its effective sub-network. With the default policy an
/// input or output neuron left without connections is an error.
inline ReductionResult effective_subnetwork(const SparseNet& net,
                                            IsolationPolicy policy = IsolationPolicy::error) {
    ReductionResult result = reduce_connections(net);
    if (policy == IsolationPolicy::error && !result.report.effective()) {
        std::string what = "network not effective:";
        for (auto c : result.report.isolated_inputs) what += " input " + std::to_string(c);
        for (auto r : result.report.isolated_outputs) what += " output " + std::to_string(r);
        what += " isolated";
        throw std::runtime_error(what);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Forward pass, loss, gradients

struct ForwardResult {
    Matrix output;
    std::vector<Matrix> hidden_outputs;   // post-activation, one per hidden layer
    std::vector<Matrix> pre_activations;  // one per hidden layer
};

inline Matrix affine(const SparseLayer& layer, const Matrix& input) {
    Matrix z = layer.weights() * input;
    if (layer.bias()) {
        const Vector& b = *layer.bias();
        for (std::size_t r = 0; r < z.rows(); ++r)
            for (std::size_t c = 0; c < z.cols(); ++c) z(r, c) += b[r];
    }
    return z;
}

inline ForwardResult forward(const SparseNet& net, const Matrix& x) {
    if (x.rows() != net.input_dim()) {
        throw std::invalid_argument("forward: data has " + std::to_string(x.rows()) +
                                    " rows but the network expects " + std::to_string(net.input_dim()));
    }
    ForwardResult out;
    const Matrix* current = &x;
    for (std::size_t k = 0; k + 1 < net.depth(); ++k) {
        Matrix z = affine(net.layer(k), *current);
        Matrix h = z;
        for (double& v : h.values()) v = net.activation()(v);
        out.pre_activations.push_back(std::move(z));
        out.hidden_outputs.push_back(std::move(h));
        current = &out.hidden_outputs.back();
    }
    out.output = affine(net.layer(net.depth() - 1), *current);
    return out;
}

inline Matrix residual(const SparseNet& net, const Matrix& x, const Matrix& y) {
    Matrix out = forward(net, x).output;
    require_same_shape(out, y, "residual");
    return out - y;
}

/// Half squared Frobenius norm of the residual.
inline double loss(const SparseNet& net, const Matrix& x, const Matrix& y) {
    return 0.5 * frobenius_norm_sq(residual(net, x, y));
}

struct NetGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;  // empty for layers without bias

    double norm_sq() const {
        double acc = 0.0;
        for (const auto& w : weights) acc += frobenius_norm_sq(w);
        for (const auto& b : biases) acc += dot(b, b);
        return acc;
    }
};

/// Backpropagated gradient of the half squared loss; masked coordinates are
/// exactly zero. The loss itself is written to `loss_out` when given.
inline NetGradient loss_gradient(const SparseNet& net, const Matrix& x, const Matrix& y, double* loss_out = nullptr) {
    ForwardResult fr = forward(net, x);
    require_same_shape(fr.output, y, "loss_gradient");
    Matrix g = fr.output - y;
    if (loss_out) *loss_out = 0.5 * frobenius_norm_sq(g);
    const std::size_t depth = net.depth();
    NetGradient grad{std::vector<Matrix>(depth), std::vector<Vector>(depth)};
    for (std::size_t k = depth; k-- > 0;) {
        const SparseLayer& l = net.layer(k);
        const Matrix& input = k == 0 ? x : fr.hidden_outputs[k - 1];
        Matrix dw = g * transpose(input);
        for (std::size_t i = 0; i < dw.size(); ++i)
            if (!l.mask().values()[i]) dw.values()[i] = 0.0;
        grad.weights[k] = std::move(dw);
        if (l.bias()) {
            Vector db(l.out_dim(), 0.0);
            for (std::size_t r = 0; r < g.rows(); ++r) {
                if (!l.has_bias(r)) continue;
                for (std::size_t c = 0; c < g.cols(); ++c) db[r] += g(r, c);
            }
            grad.biases[k] = std::move(db);
        }
        if (k > 0) {
            Matrix back = transpose(l.weights()) * g;
            const Matrix& pre = fr.pre_activations[k - 1];
            for (std::size_t i = 0; i < back.size(); ++i) back.values()[i] *= net.activation().derivative(pre.values()[i]);
            g = std::move(back);
        }
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Flat parameter view over unmasked coordinates (weights row-major, then bias,
// layer by layer).

inline Vector flatten_parameters(const SparseNet& net) {
    Vector out;
    for (const auto& l : net.layers()) {
        for (std::size_t i = 0; i < l.weights().size(); ++i)
            if (l.mask().values()[i]) out.push_back(l.weights().values()[i]);
        if (l.bias())
            for (std::size_t r = 0; r < l.out_dim(); ++r)
                if (l.has_bias(r)) out.push_back((*l.bias())[r]);
    }
    return out;
}

inline SparseNet with_parameters(const SparseNet& net, std::span<const double> params) {
    if (params.size() != net.parameter_count())
        throw std::invalid_argument("with_parameters: expected " + std::to_string(net.parameter_count()) +
                                    " values, got " + std::to_string(params.size()));
    SparseNet out = net;
    std::size_t pos = 0;
    for (auto& l : out.mutable_layers()) {
        for (std::size_t r = 0; r < l.out_dim(); ++r)
            for (std::size_t c = 0; c < l.in_dim(); ++c)
                if (l.mask()(r, c)) l.set_weight(r, c, params[pos++]);
        if (l.bias())
            for (std::size_t r = 0; r < l.out_dim(); ++r)
                if (l.has_bias(r)) l.set_bias(r, params[pos++]);
    }
    return out;
}

inline Vector flatten_gradient(const SparseNet& net, const NetGradient& g) {
    Vector out;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const auto& l = net.layer(k);
        for (std::size_t i = 0; i < l.weights().size(); ++i)
            if (l.mask().values()[i]) out.push_back(g.weights[k].values()[i]);
        if (l.bias())
            for (std::size_t r = 0; r < l.out_dim(); ++r)
                if (l.has_bias(r)) out.push_back(g.biases[k][r]);
    }
    return out;
}

}  // namespace sparseland
