#pragma once

#include <cstdint>
#include <random>

#include "sparseland/linalg.hpp"

namespace sparseland {

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept {
    return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    /// Independent generator for a named sub-stream; the parent is untouched.
    Rng split(std::uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

    std::uint64_t seed() const noexcept { return seed_; }

    double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    bool bernoulli(double p) { return std::bernoulli_distribution(p)(engine_); }
    std::uint64_t next() { return engine_(); }

    Matrix normal_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = normal();
        return m;
    }

    Matrix uniform_matrix(std::size_t rows, std::size_t cols, double lo, double hi) {
        Matrix m(rows, cols);
        for (double& v : m.values()) v = uniform(lo, hi);
        return m;
    }

    Vector unit_vector(std::size_t n) {
        Vector v(n);
        double nrm = 0.0;
        while (nrm == 0.0) {
            for (double& x : v) x = normal();
            nrm = norm(v);
        }
        for (double& x : v) x /= nrm;
        return v;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace sparseland
