#pragma once

#include "udslab/data.hpp"
#include "udslab/mdp.hpp"
#include "udslab/types.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace udslab {

/// A transition after a sharing strategy ran: it carries the reward the
/// learner will see and a sharing weight in [0, 1]. Labeled transitions
/// always keep weight 1 and their observed reward.
struct WeightedTransition {
    int state = 0;
    int action = 0;
    int next_state = 0;
    double weight = 1.0;
    double assigned_reward = 0.0;
    bool labeled = false;
};

/// Merged labeled + shared data with the derived tables the solver and the
/// bound evaluators consume. Weighted counts generalize plain counts when a
/// strategy assigns fractional weights; with all-unit weights they coincide.
///
/// Conventions at pairs with no retained data: f = 1 (no unlabeled data was
/// shared there), r_eff = 0, and the behavior policy row falls back to
/// uniform at states with no data.
struct EffectiveDataset {
    std::vector<WeightedTransition> transitions;
    Matrix f_table;             // labeled fraction f(s,a)
    Matrix r_eff_table;         // effective reward
    TabularPolicy behavior;     // empirical conditional of the weighted counts
    IntMatrix counts_eff;       // retained transitions (weight > 0) per pair
    Matrix weighted_counts_sa;  // sum of weights per pair
    Vector weighted_counts_s;   // sum of weights per state

    int num_states() const { return static_cast<int>(f_table.rows()); }
    int num_actions() const { return static_cast<int>(f_table.cols()); }
    double total_weight() const { return weighted_counts_s.sum(); }

    /// CSV with the Dataset schema plus weight and assigned_reward columns.
    std::string to_csv() const;
};

/// Recomputes the derived tables from a weighted transition list.
EffectiveDataset finalize_effective(int num_states, int num_actions,
                                    std::vector<WeightedTransition> transitions);

enum class StrategyKind {
    no_sharing,
    sharing_all,
    uds,
    reward_predictor,
    cds_filter,
    cds_soft,
    cds_uds,
    optimal_reweight
};

const char* strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

struct StrategySpec {
    StrategyKind kind = StrategyKind::uds;
    double k_percentile = 50.0;
    double temperature_decay = 0.995;
    double temperature_clip_min = 1.0;
    double temperature_clip_max = std::numeric_limits<double>::infinity();
    double predictor_smoothing = 1.0;

    void validate() const;
};

enum class CdsMode { hard, soft };

struct CdsWeights {
    std::vector<double> weights; // one per candidate transition
    double threshold = 0.0;      // the k-percentile of the reference Q values
};

/// Extra inputs some strategies need. The oracle MDP backs sharing_all and
/// the CDS variants that relabel with true rewards; the conservative Q table
/// comes from a solve on the labeled data alone; the policy occupancy and
/// constants feed the optimized reweighting.
struct StrategyContext {
    const TabularMdp* oracle_mdp = nullptr;
    const Matrix* conservative_q = nullptr;
    const Matrix* policy_occupancy = nullptr; // d-hat of the labeled-only solve
    double c_p = 1.0;
    double discount = 0.0;
};

/// Zero-reward sharing: unlabeled transitions enter with reward 0, weight 1.
/// Throws std::invalid_argument if the unlabeled input carries rewards or the
/// labeled input misses any.
EffectiveDataset apply_uds(const Dataset& labeled, const Dataset& unlabeled);

/// Oracle sharing: unlabeled transitions enter with the true reward.
EffectiveDataset apply_sharing_all(const Dataset& labeled, const Dataset& unlabeled,
                                   const TabularMdp& oracle);

/// Smoothed tabular regression toward the global labeled mean:
/// r(s,a) = (sum of observed rewards + smoothing * prior) / (count + smoothing),
/// clipped to [0, 1]; unobserved pairs get the prior.
Matrix fit_reward_predictor(const Dataset& labeled, double smoothing);

/// Shares unlabeled transitions labeled with the predicted reward.
EffectiveDataset apply_reward_predictor(const Dataset& labeled, const Dataset& unlabeled,
                                        const Matrix& predictor);

/// Per-transition sharing weights from conservative Q values. The gap is
/// Delta(s,a) = Q(s,a) - P_k{ Q(s',a') : (s',a') in reference }. Hard mode
/// keeps transitions with Delta >= 0; soft mode weighs them sigma(Delta/tau)
/// where tau tracks an exponential running average of |Delta| (seeded with
/// the candidate mean, decayed per transition, clipped to the spec range).
CdsWeights cds_weights(const Dataset& candidate, const Dataset& reference,
                       const Matrix& conservative_q, const StrategySpec& spec, CdsMode mode);

/// Dispatches to the strategy named by the spec. Throws std::invalid_argument
/// when the context misses a required ingredient.
EffectiveDataset apply_strategy(const StrategySpec& spec, const Dataset& labeled,
                                const Dataset& unlabeled, const StrategyContext& context = {});

struct ReweightResult {
    Matrix p;              // optimized distribution over state-action pairs
    double objective = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// Solves min_p sum C1 d/sqrt(p) + C2 dL d / p over the simplex restricted to
/// the support of d (mass outside it is zero), by mirror descent with random
/// restarts. Throws ConvergenceError past the iteration cap.
ReweightResult optimal_reweight(const OccupancyMeasure& d_pi, const OccupancyMeasure& d_L,
                                double c1, double c2);

/// Closed-form bias minimizer: elementwise sqrt(dL * d), normalized. Throws
/// std::invalid_argument when the supports are disjoint.
Matrix closed_form_bias_minimizer(const OccupancyMeasure& d_pi, const OccupancyMeasure& d_L);

} // namespace udslab
