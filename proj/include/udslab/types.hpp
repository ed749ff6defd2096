#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace udslab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;
using IntVector = Eigen::VectorXi;

/// Thrown when a dataset misses state-action pairs required in strict
/// coverage mode; carries the offending pairs.
class CoverageError : public std::runtime_error {
public:
    CoverageError(std::string message, std::vector<std::pair<int, int>> missing)
        : std::runtime_error(std::move(message)), missing_pairs(std::move(missing)) {}

    std::vector<std::pair<int, int>> missing_pairs;
};

/// Thrown when a distribution places mass outside the support of a
/// reference distribution (e.g. p > 0 where q = 0).
class SupportError : public std::runtime_error {
public:
    SupportError(std::string message, int index)
        : std::runtime_error(std::move(message)), index(index) {}

    int index;
};

/// Thrown by iterative optimizers that hit their iteration cap; carries the
/// best iterate found and its stationarity residual.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(std::string message, Vector best, double residual)
        : std::runtime_error(std::move(message)), best_iterate(std::move(best)),
          residual(residual) {}

    Vector best_iterate;
    double residual;
};

/// Deterministic pseudo-random generator (xoshiro256++ seeded via
/// splitmix64). Self-contained so that seeded runs are bit-identical across
/// standard libraries and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            // splitmix64 step
            x += 0x9e3779b97f4a7c15ULL;
            std::uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            word = z ^ (z >> 31);
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n).
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

    /// Draws an index from an (unnormalized is fine) nonnegative weight vector.
    int categorical(const Vector& weights) {
        const double total = weights.sum();
        double u = uniform01() * total;
        for (int i = 0; i < weights.size(); ++i) {
            u -= weights(i);
            if (u < 0.0) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

    /// Dirichlet(1,...,1) draw over n points via normalized exponentials.
    Vector dirichlet(int n) {
        Vector x(n);
        for (int i = 0; i < n; ++i) x(i) = -std::log(1.0 - uniform01());
        return x / x.sum();
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::uint64_t state_[4];
};

} // namespace udslab
