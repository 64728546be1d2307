#pragma once

// Small dense linear algebra: a row-major matrix type, the handful of
// products the landscape code needs, a cyclic Jacobi symmetric eigensolver
// and a one-sided Jacobi SVD (used for ranks and pseudoinverses).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sparseland {

using Vector = std::vector<double>;

template <typename T>
class basic_matrix {
public:
    basic_matrix() = default;
    basic_matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    basic_matrix(std::initializer_list<std::initializer_list<T>> init) {
        rows_ = init.size();
        cols_ = rows_ == 0 ? 0 : init.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_) {
                throw std::invalid_argument("matrix initializer rows have different lengths");
            }
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static basic_matrix identity(std::size_t n) {
        basic_matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<T>& values() noexcept { return data_; }
    const std::vector<T>& values() const noexcept { return data_; }

    bool same_shape(const auto& other) const noexcept {
        return rows_ == other.rows() && cols_ == other.cols();
    }

    friend bool operator==(const basic_matrix&, const basic_matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = basic_matrix<double>;
using Mask = basic_matrix<std::uint8_t>;

inline std::string shape_string(const auto& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const auto& a, const auto& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_string(a) +
                                    " vs " + shape_string(b));
    }
}

inline Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "matrix add");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
    return out;
}

inline Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "matrix subtract");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] -= b.values()[i];
    return out;
}

inline Matrix operator*(double s, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.values()) v *= s;
    return out;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matrix product: inner dimensions differ " + shape_string(a) +
                                    " * " + shape_string(b));
    }
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* orow = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: size mismatch");
    Vector out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        out[i] = acc;
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline double frobenius_norm_sq(const Matrix& a) {
    double acc = 0.0;
    for (double v : a.values()) acc += v * v;
    return acc;
}

inline double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.values()) m = std::max(m, std::abs(v));
    return m;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Matrix outer(std::span<const double> a, std::span<const double> b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

inline Matrix column_matrix(std::span<const double> v) {
    Matrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    return m;
}

inline Matrix row_matrix(std::span<const double> v) {
    Matrix m(1, v.size());
    std::copy(v.begin(), v.end(), m.values().begin());
    return m;
}

inline Vector column(const Matrix& a, std::size_t c) {
    Vector v(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) v[i] = a(i, c);
    return v;
}

inline Matrix select_rows(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), a.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        auto src = a.row(idx[r]);
        std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
}

inline Matrix select_cols(const Matrix& a, std::span<const std::size_t> idx) {
    Matrix out(a.rows(), idx.size());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < idx.size(); ++c) out(r, c) = a(r, idx[c]);
    return out;
}

inline Matrix vstack(std::span<const Matrix> blocks) {
    if (blocks.empty()) return {};
    const std::size_t cols = blocks.front().cols();
    std::size_t rows = 0;
    for (const auto& b : blocks) {
        if (b.cols() != cols) throw std::invalid_argument("vstack: column counts differ");
        rows += b.rows();
    }
    Matrix out(rows, cols);
    std::size_t r0 = 0;
    for (const auto& b : blocks) {
        std::copy(b.values().begin(), b.values().end(), out.values().begin() + r0 * cols);
        r0 += b.rows();
    }
    return out;
}

inline Matrix hstack(std::span<const Matrix> blocks) {
    if (blocks.empty()) return {};
    const std::size_t rows = blocks.front().rows();
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows) throw std::invalid_argument("hstack: row counts differ");
        cols += b.cols();
    }
    Matrix out(rows, cols);
    std::size_t c0 = 0;
    for (const auto& b : blocks) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < b.cols(); ++c) out(r, c0 + c) = b(r, c);
        c0 += b.cols();
    }
    return out;
}

struct SymEigResult {
    Vector values;   // ascending
    Matrix vectors;  // column k pairs with values[k]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Deterministic: the
/// sweep order is fixed row-by-row over the strict upper triangle.
inline SymEigResult sym_eig(const Matrix& input, double symmetry_tol = 1e-10) {
    if (input.rows() != input.cols()) throw std::invalid_argument("sym_eig: matrix is not square");
    const std::size_t n = input.rows();
    const double scale = std::max(1.0, max_abs(input));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(input(i, j) - input(j, i)) > symmetry_tol * scale)
                throw std::invalid_argument("sym_eig: matrix is not symmetric");

    Matrix a = input;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (input(i, j) + input(j, i));
    Matrix v = Matrix::identity(n);

    const double total = frobenius_norm(a);
    constexpr int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off == 0.0 || std::sqrt(off) <= std::numeric_limits<double>::epsilon() * total) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
    SymEigResult out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

struct SvdResult {
    Vector singular_values;  // descending, length min(m, n)
    Matrix u;                // m x k
    Matrix v;                // n x k
};

/// One-sided (Hestenes) Jacobi SVD. Accurate for small singular values,
/// which matters for the relative rank tolerances used throughout.
inline SvdResult svd(const Matrix& input) {
    const bool wide = input.rows() < input.cols();
    Matrix g = wide ? transpose(input) : input;
    const std::size_t m = g.rows();
    const std::size_t n = g.cols();
    Matrix v = Matrix::identity(n);

    constexpr double eps = std::numeric_limits<double>::epsilon();
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    alpha += g(k, i) * g(k, i);
                    beta += g(k, j) * g(k, j);
                    gamma += g(k, i) * g(k, j);
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double gi = g(k, i);
                    const double gj = g(k, j);
                    g(k, i) = c * gi - s * gj;
                    g(k, j) = s * gi + c * gj;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vi = v(k, i);
                    const double vj = v(k, j);
                    v(k, i) = c * vi - s * vj;
                    v(k, j) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) break;
    }

    Vector sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += g(k, j) * g(k, j);
        sv[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    Matrix left(m, n);
    Matrix right(n, n);
    Vector sorted(n);
    for (std::size_t c = 0; c < n; ++c) {
        const std::size_t src = order[c];
        sorted[c] = sv[src];
        for (std::size_t k = 0; k < m; ++k) left(k, c) = sv[src] > 0.0 ? g(k, src) / sv[src] : 0.0;
        for (std::size_t k = 0; k < n; ++k) right(k, c) = v(k, src);
    }
    if (wide) return {std::move(sorted), std::move(right), std::move(left)};
    return {std::move(sorted), std::move(left), std::move(right)};
}

inline Vector singular_values(const Matrix& m) { return svd(m).singular_values; }

/// Count of singular values above `tol` times the largest one.
inline std::size_t numerical_rank(const Matrix& m, double tol = 1e-8) {
    if (m.empty()) return 0;
    const Vector sv = singular_values(m);
    if (sv.empty() || sv.front() == 0.0) return 0;
    const double cutoff = tol * sv.front();
    return static_cast<std::size_t>(std::count_if(sv.begin(), sv.end(), [&](double s) { return s > cutoff; }));
}

/// Moore-Penrose pseudoinverse; singular values below rtol * max are dropped.
inline Matrix pinv(const Matrix& a, double rtol = 1e-12) {
    const SvdResult d = svd(a);
    Matrix out(a.cols(), a.rows());
    if (d.singular_values.empty() || d.singular_values.front() == 0.0) return out;
    const double cutoff = rtol * d.singular_values.front();
    for (std::size_t k = 0; k < d.singular_values.size(); ++k) {
        const double s = d.singular_values[k];
        if (s <= cutoff) continue;
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double vik = d.v(i, k) / s;
            if (vik == 0.0) continue;
            for (std::size_t j = 0; j < a.rows(); ++j) out(i, j) += vik * d.u(j, k);
        }
    }
    return out;
}

}  // namespace sparseland
