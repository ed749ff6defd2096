#pragma once

#include "udslab/types.hpp"

#include <functional>

namespace udslab {

/// Euclidean projection onto the probability simplex (sort-threshold-clip).
Vector project_to_simplex(const Vector& x);

enum class SimplexMethod {
    projection, // projected gradient with Euclidean projection
    mirror      // exponentiated-gradient (entropic mirror) steps
};

struct SimplexMinimizeOptions {
    SimplexMethod method = SimplexMethod::mirror;
    int restarts = 10;
    int max_iters = 200000;
    /// Stop when max_i |g_i - x.g| falls below this, relative to max(1, |x.g|).
    double kkt_tol = 1e-9;
    std::uint64_t seed = 0x5eedULL;
    bool throw_on_max_iters = false;
};

struct SimplexMinimizeResult {
    Vector x;
    double value = 0.0;
    double kkt_residual = 0.0; // absolute max_i |g_i - x.g| at the solution
    int iterations = 0;
    bool converged = false;
};

/// Minimizes a smooth convex function over the probability simplex, with
/// coordinates outside `support` pinned to zero. Runs `restarts` seeded
/// starting points (uniform, plus Dirichlet draws) and returns the best.
SimplexMinimizeResult minimize_on_simplex(
    const std::function<double(const Vector&)>& objective,
    const std::function<Vector(const Vector&)>& gradient, const std::vector<bool>& support,
    const SimplexMinimizeOptions& options = {});

} // namespace udslab
