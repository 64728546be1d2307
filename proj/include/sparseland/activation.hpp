#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sparseland {

enum class ActivationKind {
    linear,
    relu,
    leaky_relu,
    elu,
    tanh,
    sigmoid,
    shifted_sigmoid,
    softplus,
    polynomial,
};

namespace detail {

// Taylor coefficients of tanh at 0 from tanh' = 1 - tanh^2:
// (n + 1) a_{n+1} = [n == 0] - sum_{i+j=n} a_i a_j. Even terms stay exactly 0.
inline const std::vector<double>& tanh_taylor_coefficients() {
    static const std::vector<double> coeffs = [] {
        constexpr int max_order = 80;
        std::vector<double> a(max_order + 1, 0.0);
        for (int n = 0; n < max_order; ++n) {
            double conv = 0.0;
            for (int i = 0; i <= n; ++i) conv += a[i] * a[n - i];
            a[n + 1] = ((n == 0 ? 1.0 : 0.0) - conv) / static_cast<double>(n + 1);
        }
        return a;
    }();
    return coeffs;
}

inline double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) f *= i;
    return f;
}

}  // namespace detail

/// An element-wise activation. Parameterized kinds carry their parameter
/// (`slope` for leaky ReLU, `alpha` for ELU, coefficients for polynomials).
class Activation {
public:
    Activation() = default;

    static Activation linear() { return Activation(ActivationKind::linear); }
    static Activation relu() { return Activation(ActivationKind::relu); }
    static Activation leaky_relu(double slope = 0.01) {
        Activation a(ActivationKind::leaky_relu);
        a.param_ = slope;
        return a;
    }
    static Activation elu(double alpha = 1.0) {
        Activation a(ActivationKind::elu);
        a.param_ = alpha;
        return a;
    }
    static Activation tanh() { return Activation(ActivationKind::tanh); }
    static Activation sigmoid() { return Activation(ActivationKind::sigmoid); }
    static Activation shifted_sigmoid() { return Activation(ActivationKind::shifted_sigmoid); }
    static Activation softplus() { return Activation(ActivationKind::softplus); }
    static Activation polynomial(std::vector<double> coeffs) {
        if (coeffs.empty()) throw std::invalid_argument("polynomial activation needs at least one coefficient");
        for (double c : coeffs)
            if (!std::isfinite(c)) throw std::invalid_argument("polynomial coefficients must be finite");
        Activation a(ActivationKind::polynomial);
        a.coeffs_ = std::move(coeffs);
        return a;
    }

    /// Parses "tanh", "leaky_relu", "shifted_sigmoid", ... with the default parameters.
    static Activation from_name(std::string_view name) {
        if (name == "linear") return linear();
        if (name == "relu") return relu();
        if (name == "leaky_relu" || name == "leakyrelu") return leaky_relu();
        if (name == "elu") return elu();
        if (name == "tanh") return tanh();
        if (name == "sigmoid") return sigmoid();
        if (name == "shifted_sigmoid") return shifted_sigmoid();
        if (name == "softplus") return softplus();
        throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
    }

    ActivationKind kind() const noexcept { return kind_; }
    double parameter() const noexcept { return param_; }
    const std::vector<double>& coefficients() const noexcept { return coeffs_; }
    int degree() const { return static_cast<int>(coeffs_.size()) - 1; }

    std::string name() const {
        switch (kind_) {
            case ActivationKind::linear: return "linear";
            case ActivationKind::relu: return "relu";
            case ActivationKind::leaky_relu: return "leaky_relu";
            case ActivationKind::elu: return "elu";
            case ActivationKind::tanh: return "tanh";
            case ActivationKind::sigmoid: return "sigmoid";
            case ActivationKind::shifted_sigmoid: return "shifted_sigmoid";
            case ActivationKind::softplus: return "softplus";
            case ActivationKind::polynomial: return "polynomial";
        }
        return "unknown";
    }

    double operator()(double z) const {
        switch (kind_) {
            case ActivationKind::linear: return z;
            case ActivationKind::relu: return z > 0.0 ? z : 0.0;
            case ActivationKind::leaky_relu: return z > 0.0 ? z : param_ * z;
            case ActivationKind::elu: return z > 0.0 ? z : param_ * std::expm1(z);
            case ActivationKind::tanh: return std::tanh(z);
            case ActivationKind::sigmoid: return logistic(z);
            case ActivationKind::shifted_sigmoid: return logistic(z) - 0.5;
            case ActivationKind::softplus: return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
            case ActivationKind::polynomial: {
                double acc = 0.0;
                for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
                return acc;
            }
        }
        return 0.0;
    }

    /// First derivative; at the kinks of ReLU-type activations the right
    /// derivative is used for z > 0 and the left one otherwise.
    double derivative(double z) const {
        switch (kind_) {
            case ActivationKind::linear: return 1.0;
            case ActivationKind::relu: return z > 0.0 ? 1.0 : 0.0;
            case ActivationKind::leaky_relu: return z > 0.0 ? 1.0 : param_;
            case ActivationKind::elu: return z > 0.0 ? 1.0 : param_ * std::exp(z);
            case ActivationKind::tanh: {
                const double t = std::tanh(z);
                return 1.0 - t * t;
            }
            case ActivationKind::sigmoid:
            case ActivationKind::shifted_sigmoid: {
                const double s = logistic(z);
                return s * (1.0 - s);
            }
            case ActivationKind::softplus: return logistic(z);
            case ActivationKind::polynomial: {
                double acc = 0.0;
                for (std::size_t k = coeffs_.size(); k-- > 1;) acc = acc * z + static_cast<double>(k) * coeffs_[k];
                return acc;
            }
        }
        return 0.0;
    }

    /// k-th derivative at the origin, or nullopt for kinds that are not
    /// analytic at 0 (ReLU family, ELU).
    std::optional<double> taylor_at_zero(int k) const {
        if (k < 0) throw std::invalid_argument("derivative order must be non-negative");
        const auto& t = detail::tanh_taylor_coefficients();
        auto tanh_coeff = [&](int order) {
            if (order >= static_cast<int>(t.size()))
                throw std::out_of_range("derivative order beyond the tabulated series");
            return t[order];
        };
        switch (kind_) {
            case ActivationKind::linear: return k == 1 ? 1.0 : 0.0;
            case ActivationKind::relu:
            case ActivationKind::leaky_relu:
            case ActivationKind::elu: return std::nullopt;
            case ActivationKind::tanh: return detail::factorial(k) * tanh_coeff(k);
            case ActivationKind::sigmoid:
            case ActivationKind::shifted_sigmoid: {
                // sigmoid(z) = 1/2 + tanh(z/2)/2
                if (k == 0) return kind_ == ActivationKind::sigmoid ? 0.5 : 0.0;
                return detail::factorial(k) * tanh_coeff(k) / std::ldexp(1.0, k + 1);
            }
            case ActivationKind::softplus: {
                if (k == 0) return std::log(2.0);
                if (k == 1) return 0.5;
                return detail::factorial(k - 1) * tanh_coeff(k - 1) / std::ldexp(1.0, k);
            }
            case ActivationKind::polynomial:
                return k < static_cast<int>(coeffs_.size()) ? detail::factorial(k) * coeffs_[k] : 0.0;
        }
        return std::nullopt;
    }

    bool is_analytic() const {
        return kind_ != ActivationKind::relu && kind_ != ActivationKind::leaky_relu &&
               kind_ != ActivationKind::elu;
    }

    friend bool operator==(const Activation&, const Activation&) = default;

private:
    explicit Activation(ActivationKind kind) : kind_(kind) {}

    static double logistic(double z) {
        if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
        const double e = std::exp(z);
        return e / (1.0 + e);
    }

    ActivationKind kind_ = ActivationKind::linear;
    double param_ = 0.0;
    std::vector<double> coeffs_;
};

}  // namespace sparseland
