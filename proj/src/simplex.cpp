#include "udslab/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace udslab {

Vector project_to_simplex(const Vector& x) {
    const int n = static_cast<int>(x.size());
    Vector sorted = x;
    std::sort(sorted.data(), sorted.data() + n, std::greater<double>());
    double cumsum = 0.0;
    double threshold = 0.0;
    for (int i = 0; i < n; ++i) {
        cumsum += sorted(i);
        const double t = (cumsum - 1.0) / (i + 1);
        if (sorted(i) - t > 0.0) threshold = t;
    }
    return (x.array() - threshold).cwiseMax(0.0);
}

namespace {

// Gathers the free coordinates, runs the solver in the reduced space, and
// scatters back. All math below operates on the reduced vector.
struct ReducedProblem {
    std::vector<int> index;
    const std::function<double(const Vector&)>& objective;
    const std::function<Vector(const Vector&)>& gradient;
    int full_size;

    Vector expand(const Vector& x) const {
        Vector out = Vector::Zero(full_size);
        for (std::size_t i = 0; i < index.size(); ++i) out(index[i]) = x(i);
        return out;
    }

    double value(const Vector& x) const { return objective(expand(x)); }

    Vector grad(const Vector& x) const {
        const Vector g = gradient(expand(x));
        Vector out(static_cast<int>(index.size()));
        for (std::size_t i = 0; i < index.size(); ++i) out(i) = g(index[i]);
        return out;
    }
};

// Stationarity on the simplex: at an interior optimum the gradient is
// constant across free coordinates, so the residual is max_i |g_i - x.g|.
double kkt_residual(const Vector& x, const Vector& g) {
    const double lambda = x.dot(g);
    double res = 0.0;
    for (int i = 0; i < x.size(); ++i) res = std::max(res, std::abs(g(i) - lambda));
    return res;
}

double gradient_scale(const Vector& x, const Vector& g) {
    return std::max(1.0, std::abs(x.dot(g)));
}

SimplexMinimizeResult solve_from(const ReducedProblem& problem, Vector x,
                                 const SimplexMinimizeOptions& options) {
    const int n = static_cast<int>(x.size());
    double step = 1.0;
    double fx = problem.value(x);
    SimplexMinimizeResult result;
    int it = 0;
    for (; it < options.max_iters; ++it) {
        const Vector g = problem.grad(x);
        const double res = kkt_residual(x, g);
        if (res <= options.kkt_tol * gradient_scale(x, g)) {
            result.converged = true;
            break;
        }
        // Backtracking on the raw objective; the step grows again on success.
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vector candidate;
            if (options.method == SimplexMethod::mirror) {
                const Vector scaled = -step * (g.array() - g.minCoeff()).matrix();
                candidate = (x.array() * scaled.array().exp()).matrix();
                const double total = candidate.sum();
                if (!(total > 0.0) || !candidate.allFinite()) {
                    step *= 0.5;
                    continue;
                }
                candidate /= total;
            } else {
                candidate = project_to_simplex(x - step * g);
            }
            const double fc = problem.value(candidate);
            if (std::isfinite(fc) && fc <= fx - 1e-14 * std::abs(fx)) {
                x = candidate;
                fx = fc;
                step *= 1.25;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if (!moved) {
            // Line search exhausted: the objective no longer improves at
            // machine precision. Accept if the iterate is near-stationary.
            result.converged = res <= 1e-6 * gradient_scale(x, g);
            break;
        }
        if (n == 1) {
            result.converged = true;
            break;
        }
    }
    const Vector g = problem.grad(x);
    result.x = x;
    result.value = fx;
    result.kkt_residual = kkt_residual(x, g);
    result.iterations = it;
    if (result.kkt_residual <= options.kkt_tol * gradient_scale(x, g)) result.converged = true;
    return result;
}

} // namespace

SimplexMinimizeResult minimize_on_simplex(
    const std::function<double(const Vector&)>& objective,
    const std::function<Vector(const Vector&)>& gradient, const std::vector<bool>& support,
    const SimplexMinimizeOptions& options) {
    ReducedProblem problem{{}, objective, gradient, static_cast<int>(support.size())};
    for (int i = 0; i < static_cast<int>(support.size()); ++i) {
        if (support[i]) problem.index.push_back(i);
    }
    const int n = static_cast<int>(problem.index.size());
    if (n == 0) throw std::invalid_argument("empty support");

    Rng rng(options.seed);
    SimplexMinimizeResult best;
    best.value = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
        Vector x0 = restart == 0 ? Vector::Constant(n, 1.0 / n) : rng.dirichlet(n);
        // Keep starts away from the boundary where 1/p-style objectives blow up.
        x0 = (x0.array() + 1e-3 / n).matrix();
        x0 /= x0.sum();
        SimplexMinimizeResult candidate = solve_from(problem, x0, options);
        if (candidate.value < best.value ||
            (candidate.value == best.value && candidate.kkt_residual < best.kkt_residual)) {
            best = candidate;
        }
    }
    if (!best.converged && options.throw_on_max_iters) {
        throw ConvergenceError("simplex minimization did not converge (residual " +
                                   std::to_string(best.kkt_residual) + ")",
                               problem.expand(best.x), best.kkt_residual);
    }
    best.x = problem.expand(best.x);
    return best;
}

} // namespace udslab
