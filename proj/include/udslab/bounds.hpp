#pragma once

#include "udslab/mdp.hpp"
#include "udslab/relabel.hpp"
#include "udslab/solver.hpp"
#include "udslab/types.hpp"

#include <string>

namespace udslab {

/// Every quantity entering the safe-improvement inequality
///   J(pi*) >= J(behavior) - zeta_err + policy_improvement,
/// evaluated exactly. The bias and sampling terms use occupancies on the
/// empirical MDP of the effective dataset; the J values use the true MDP.
struct BoundReport {
    double term_a_reward_bias = 0.0;
    double term_b_sampling_error = 0.0;
    double term_c_policy_improvement = 0.0;
    double zeta_err = 0.0;
    double j_true_learned = 0.0;
    double j_true_behavior = 0.0;
    double j_empirical_learned = 0.0;
    bool guarantee_holds = false;
    double delta = 0.0;
    double c_r = 0.0;
    double c_p = 0.0;

    std::string to_json() const;
    /// Flat CSV (header + one row) for sweep aggregation.
    std::string to_csv_row() const;
    static std::string csv_header();
};

struct ConcentrationConstants {
    double c_r = 0.0;
    double c_p = 0.0;
};

enum class ConcentrationModel { hoeffding };

/// Union-bound concentration constants over all pairs of the given count
/// table: c_r from Hoeffding for rewards of the given range, c_p from the L1
/// deviation bound for empirical transition rows.
ConcentrationConstants concentration_constants(const IntMatrix& num_samples_table, double delta,
                                               double reward_range = 1.0,
                                               ConcentrationModel model =
                                                   ConcentrationModel::hoeffding);

/// Reward-bias suboptimality
///   (1/(1-gamma)) sum_{s,a} (d_behavior - d_policy) * delta_r
/// with both occupancies computed on the empirical MDP of the effective
/// dataset. Pass delta_r = (1 - f) * r for zero-reward sharing or r - r_phi
/// for a reward predictor.
double reward_bias(const EffectiveDataset& effective, const TabularPolicy& learned_policy,
                   const Matrix& reward_error, double discount, const Vector& initial_dist);

/// Sampling-error bound with the explicit constants:
///   (2 gamma c_p / (1-gamma)^2) E_{s ~ d}[ sqrt(|A|) / sqrt(|D(s)|)
///                                          * sqrt(D_cql(s) + 1) ]
/// + (2 c_r / (1-gamma))        E_{s,a ~ d}[ f / sqrt(|D_L(s,a)|) ].
/// Throws CoverageError when the policy visits a state with no data.
double sampling_error_bound(const EffectiveDataset& effective, const TabularPolicy& learned_policy,
                            double c_p, double c_r, double discount, const Vector& initial_dist);

/// Assembles the full report for a solved instance and evaluates the
/// guarantee inequality literally against the true MDP.
BoundReport guarantee_report(const TabularMdp& mdp, const EffectiveDataset& effective,
                             const SolveResult& result, double delta, double alpha,
                             Divergence divergence = Divergence::cql);

/// Bias objective evaluated at a candidate effective-data distribution p
/// (positive constant factors that cannot move the argmin are dropped):
///   sum p * r + (1/|counts|) sum counts * r * (d_pi / p - 1).
/// Returns +infinity when p = 0 somewhere d_pi > 0. The global minimizer over
/// the simplex is the closed-form bias minimizer.
double reward_bias_objective(const Matrix& p, const Matrix& d_pi, const Matrix& d_L,
                             const Matrix& counts, const Matrix& reward);

/// Constants of the optimized-reweighting objective:
///   C1 = gamma c_p / ((1-gamma)^2 sqrt(|D_eff|)),  C2 = |D_L| / ((1-gamma) |D_eff|).
std::pair<double, double> reweight_constants(double labeled_size, double effective_size,
                                             double c_p, double discount);

} // namespace udslab
