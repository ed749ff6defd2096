#pragma once

#include "udslab/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace udslab {

struct Dataset;

/// Stochastic policy as a row-stochastic |S| x |A| matrix.
struct TabularPolicy {
    Matrix probs;

    int num_states() const { return static_cast<int>(probs.rows()); }
    int num_actions() const { return static_cast<int>(probs.cols()); }

    static TabularPolicy uniform(int num_states, int num_actions);

    /// Checks row-stochasticity within 1e-12; throws std::invalid_argument.
    void validate() const;
};

/// Finite MDP with dense dynamics. `transition[a](s, s')` is the probability
/// of landing in s' after taking a in s. Rewards live in [0, 1] and depend on
/// (s, a) only.
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    std::vector<Matrix> transition; // one |S| x |S| matrix per action
    Matrix reward;                  // |S| x |A|
    double discount = 0.0;
    Vector initial_dist;

    /// Row-stochastic transitions, distribution-valued initial_dist, rewards
    /// in [0, 1], discount in [0, 1). Throws std::invalid_argument.
    void validate() const;
};

/// Normalized discounted state-action visitation. Sums to one; the return
/// identity is J = <density, reward> / (1 - discount).
struct OccupancyMeasure {
    Matrix density; // |S| x |A|

    Vector state_marginal() const { return density.rowwise().sum(); }
};

/// Strictness of the coverage requirement when estimating an MDP from data.
enum class CoverageMode { strict, lenient };

/// Empirical model plus the state-action pairs that had no data. In lenient
/// mode uncovered pairs become zero-reward self-loops and are listed here;
/// strict mode throws instead.
struct EmpiricalMdpResult {
    TabularMdp mdp;
    std::vector<std::pair<int, int>> uncovered;
};

/// State-to-state transition matrix under a fixed policy.
Matrix policy_transition_matrix(const TabularMdp& mdp, const TabularPolicy& policy);

/// Expected one-step reward per state under a fixed policy.
Vector policy_reward_vector(const TabularMdp& mdp, const TabularPolicy& policy);

/// State values V(s) from the exact linear Bellman solve, optionally with a
/// reward table overriding mdp.reward (same shape).
Vector policy_values(const TabularMdp& mdp, const TabularPolicy& policy);
Vector policy_values(const TabularMdp& mdp, const TabularPolicy& policy, const Matrix& reward);

/// Q(s, a) = r(s, a) + discount * P V.
Matrix policy_q_values(const TabularMdp& mdp, const TabularPolicy& policy);

/// Expected discounted return J = initial_dist . V, solved exactly.
double evaluate_return(const TabularMdp& mdp, const TabularPolicy& policy);

/// Normalized discounted occupancy with (1 - discount) * initial_dist source.
OccupancyMeasure occupancy(const TabularMdp& mdp, const TabularPolicy& policy);

/// Optimal action values from value iteration run to `tol` residual, then
/// polished by an exact evaluation of the greedy policy.
Matrix optimal_q_values(const TabularMdp& mdp, double tol = 1e-13, int max_iters = 100000);

/// Deterministic greedy policy; ties broken toward the lowest action index.
TabularPolicy greedy_policy(const Matrix& q_values);

/// Maximum-likelihood MDP from transition counts: P-hat from empirical
/// frequencies and r-hat from mean observed rewards. Unobserved pairs are a
/// CoverageError in strict mode and zero-reward self-loops in lenient mode.
EmpiricalMdpResult empirical_mdp(const Dataset& dataset, int num_states, int num_actions,
                                 double discount, const Vector& initial_dist,
                                 CoverageMode mode = CoverageMode::strict);

/// D_CQL(p, q) = sum_x p(x) (p(x)/q(x) - 1). Nonnegative, zero iff p = q.
/// Throws SupportError where p > 0 and q = 0.
double d_cql(const Vector& p, const Vector& q);

/// JSON (de)serialization; transition tensor flattened row-major as (s, a, s').
std::string mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const std::string& text);

} // namespace udslab
