#pragma once

// 1-D stride-1 convolution written as a sparse matrix with shared weights.
// SAME pads on the right only, so f(w) is upper triangular.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sparseland/linalg.hpp"

namespace sparseland {

enum class ConvMode { full, same, valid };

inline const char* to_string(ConvMode m) {
    switch (m) {
        case ConvMode::full: return "FULL";
        case ConvMode::same: return "SAME";
        case ConvMode::valid: return "VALID";
    }
    return "FULL";
}

inline ConvMode conv_mode_from_name(std::string_view s) {
    std::string up(s);
    for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "FULL") return ConvMode::full;
    if (up == "SAME") return ConvMode::same;
    if (up == "VALID") return ConvMode::valid;
    throw std::invalid_argument("unknown convolution mode '" + std::string(s) + "'");
}

struct ConvSpec {
    Vector kernel;        // w_1 .. w_{d1}
    std::size_t input_length = 0;
    ConvMode mode = ConvMode::full;

    std::size_t kernel_size() const noexcept { return kernel.size(); }

    std::size_t output_length() const {
        validate();
        const std::size_t d = input_length, d1 = kernel.size();
        switch (mode) {
            case ConvMode::full: return d + d1 - 1;
            case ConvMode::same: return d;
            case ConvMode::valid: return d - d1 + 1;
        }
        return 0;
    }

    void validate() const {
        if (kernel.empty()) throw std::invalid_argument("ConvSpec: empty kernel");
        if (input_length == 0) throw std::invalid_argument("ConvSpec: input length must be positive");
        if (mode == ConvMode::valid && input_length < kernel.size())
            throw std::invalid_argument("ConvSpec: VALID mode needs input length >= kernel size");
    }
};

namespace detail {

// 1-based kernel index used by output row r and input column c (both 0-based),
// or 0 when the pair is not connected.
inline std::size_t conv_tap(ConvMode mode, std::size_t d1, std::size_t r, std::size_t c) {
    const long k = mode == ConvMode::full ? static_cast<long>(c) - static_cast<long>(r) + static_cast<long>(d1)
                                          : static_cast<long>(c) - static_cast<long>(r) + 1;
    return (k >= 1 && k <= static_cast<long>(d1)) ? static_cast<std::size_t>(k) : 0;
}

}  // namespace detail

inline Matrix conv_matrix(const ConvSpec& spec) {
    const std::size_t s = spec.output_length();
    const std::size_t d = spec.input_length;
    Matrix f(s, d);
    for (std::size_t r = 0; r < s; ++r)
        for (std::size_t c = 0; c < d; ++c)
            if (auto k = detail::conv_tap(spec.mode, spec.kernel.size(), r, c)) f(r, c) = spec.kernel[k - 1];
    return f;
}

/// Sparsity pattern of f(w) for any kernel of the given size.
inline Mask conv_mask(std::size_t kernel_size, std::size_t input_length, ConvMode mode) {
    ConvSpec spec{Vector(kernel_size, 1.0), input_length, mode};
    const Matrix f = conv_matrix(spec);
    Mask m(f.rows(), f.cols());
    for (std::size_t i = 0; i < f.size(); ++i) m.values()[i] = f.values()[i] != 0.0;
    return m;
}

/// Closed-form rank of f(w). For SAME it depends on the first nonzero tap m
/// and is d - m + 1 (never negative).
inline std::size_t conv_rank_expected(const ConvSpec& spec) {
    spec.validate();
    auto first = std::find_if(spec.kernel.begin(), spec.kernel.end(), [](double v) { return v != 0.0; });
    if (first == spec.kernel.end()) return 0;
    const std::size_t d = spec.input_length;
    switch (spec.mode) {
        case ConvMode::full: return d;
        case ConvMode::same: {
            const std::size_t m = static_cast<std::size_t>(first - spec.kernel.begin()) + 1;
            return m > d ? 0 : d - m + 1;
        }
        case ConvMode::valid: return spec.output_length();
    }
    return 0;
}

/// Patches Z_r (d1 x n), one per output position, such that row r of
/// f(w) X equals w^T Z_r. Columns of X are samples.
inline std::vector<Matrix> conv_patches(const Matrix& x, std::size_t kernel_size, ConvMode mode) {
    ConvSpec spec{Vector(kernel_size, 0.0), x.rows(), mode};
    const std::size_t s = spec.output_length();
    std::vector<Matrix> out;
    out.reserve(s);
    for (std::size_t r = 0; r < s; ++r) {
        Matrix z(kernel_size, x.cols());
        for (std::size_t c = 0; c < x.rows(); ++c) {
            const std::size_t k = detail::conv_tap(mode, kernel_size, r, c);
            if (!k) continue;
            for (std::size_t j = 0; j < x.cols(); ++j) z(k - 1, j) = x(c, j);
        }
        out.push_back(std::move(z));
    }
    return out;
}

/// F(W): the per-kernel conv matrices stacked channel by channel.
inline Matrix stacked_conv_matrix(std::span<const Vector> kernels, std::size_t input_length, ConvMode mode) {
    if (kernels.empty()) throw std::invalid_argument("stacked_conv_matrix: no kernels");
    std::vector<Matrix> blocks;
    for (const auto& w : kernels) {
        if (w.size() != kernels.front().size())
            throw std::invalid_argument("stacked_conv_matrix: kernels differ in length");
        blocks.push_back(conv_matrix({w, input_length, mode}));
    }
    return vstack(blocks);
}

/// F(W) X.
inline Matrix stack_channels(std::span<const Vector> kernels, const Matrix& x, ConvMode mode) {
    return stacked_conv_matrix(kernels, x.rows(), mode) * x;
}

/// sum_r U_r (W Z_r), with W holding one kernel per row and U_r the columns
/// {j*s + r} of U (channel-major, as in U F(W) X).
inline Matrix conv_linear_output_patches(const Matrix& u, std::span<const Vector> kernels, const Matrix& x,
                                         ConvMode mode) {
    if (kernels.empty()) throw std::invalid_argument("conv_linear_output_patches: no kernels");
    const std::size_t d1 = kernels.front().size();
    const auto patches = conv_patches(x, d1, mode);
    const std::size_t s = patches.size();
    const std::size_t p1 = kernels.size();
    if (u.cols() != p1 * s) throw std::invalid_argument("conv_linear_output_patches: U has wrong width");
    Matrix w(p1, d1);
    for (std::size_t j = 0; j < p1; ++j) {
        if (kernels[j].size() != d1) throw std::invalid_argument("conv_linear_output_patches: kernels differ in length");
        for (std::size_t k = 0; k < d1; ++k) w(j, k) = kernels[j][k];
    }
    Matrix out(u.rows(), x.cols());
    std::vector<std::size_t> cols(p1);
    for (std::size_t r = 0; r < s; ++r) {
        for (std::size_t j = 0; j < p1; ++j) cols[j] = j * s + r;
        out = out + select_cols(u, cols) * (w * patches[r]);
    }
    return out;
}

}  // namespace sparseland
