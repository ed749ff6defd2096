#pragma once

#include "udslab/mdp.hpp"
#include "udslab/relabel.hpp"
#include "udslab/types.hpp"

#include <string>
#include <vector>

namespace udslab {

enum class Divergence { cql, kl };

const char* divergence_name(Divergence divergence);
Divergence divergence_from_name(const std::string& name);

/// Configuration of the conservative policy-iteration solver. Tie-breaking is
/// fixed everywhere: the lowest action index wins.
struct ConservativeConfig {
    double alpha = 1.0;
    Divergence divergence = Divergence::cql;
    int max_iters = 500;
    double tol = 1e-10;
    bool strict_coverage = false;

    void validate() const;
};

struct SolveResult {
    TabularPolicy policy;
    Matrix q_values;       // plain Q of the learned policy on the empirical MDP
    Matrix conservative_q; // Q under the penalty-modified reward
    double empirical_return = 0.0;
    double divergence_value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace; // regularized objective per iterate
    TabularMdp empirical; // the model the solve ran on
};

/// Empirical MDP of an effective dataset: transition frequencies from the
/// weighted counts and rewards from the effective reward table.
EmpiricalMdpResult empirical_mdp_from_effective(const EffectiveDataset& effective,
                                                double discount, const Vector& initial_dist,
                                                CoverageMode mode = CoverageMode::lenient);

/// Per-state divergence D(pi(.|s), behavior(.|s)) for the configured measure.
Vector divergence_per_state(const TabularPolicy& policy, const TabularPolicy& behavior,
                            Divergence divergence);

/// Divergence in expectation over the policy's occupancy on the given MDP.
double expected_divergence(const TabularMdp& mdp, const TabularPolicy& policy,
                           const TabularPolicy& behavior, Divergence divergence);

/// Regularized objective J(pi) - alpha/(1-gamma) * E_{d^pi}[D(pi, behavior)],
/// all on the given (empirical) MDP.
double regularized_objective(const TabularMdp& mdp, const TabularPolicy& policy,
                             const TabularPolicy& behavior, double alpha, Divergence divergence);

/// Regularized policy iteration on the empirical MDP of the effective
/// dataset: exact penalized evaluation alternating with an exact per-state
/// improvement (active-set solve for the cql penalty, softmax for kl).
/// Actions with zero behavior probability carry an infinite penalty and
/// receive no mass; states without data keep a uniform behavior row.
SolveResult solve_conservative(const EffectiveDataset& effective, const ConservativeConfig& config,
                               double discount, const Vector& initial_dist);

/// Exact Q of `policy` on the empirical MDP under the penalty-modified
/// reward; the table the CDS weights consume. Throws SupportError when the
/// policy weights an action the effective behavior never took.
Matrix conservative_q(const EffectiveDataset& effective, const TabularPolicy& policy,
                      double alpha, double discount);

/// JSON export: policy matrix, both Q tables (row-major), and the scalars.
std::string solve_result_to_json(const SolveResult& result);

} // namespace udslab
