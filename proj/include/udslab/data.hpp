#pragma once

#include "udslab/mdp.hpp"
#include "udslab/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace udslab {

/// One logged step. A missing reward marks the transition as unlabeled.
struct Transition {
    int state = 0;
    int action = 0;
    int next_state = 0;
    std::optional<double> reward;
    std::optional<int> task_id;
};

/// Ordered multiset of transitions plus per-pair and per-state visit counts.
struct Dataset {
    std::vector<Transition> transitions;
    IntMatrix counts_sa; // |S| x |A|
    IntVector counts_s;  // |S|
    std::string label;

    int num_states() const { return static_cast<int>(counts_sa.rows()); }
    int num_actions() const { return static_cast<int>(counts_sa.cols()); }
    int size() const { return static_cast<int>(transitions.size()); }

    /// Builds counts from the transition list and validates index ranges.
    static Dataset from_transitions(int num_states, int num_actions,
                                    std::vector<Transition> transitions,
                                    std::string label = {});
};

/// Behavior-policy quality tiers used to synthesize datasets.
enum class Quality { expert, medium, random, soft_optimal };

struct QualitySpec {
    Quality kind = Quality::medium;
    double epsilon = 0.5;     // uniform mixing weight for `medium`
    double temperature = 1.0; // softmax temperature for `soft_optimal`
};

const char* quality_name(Quality kind);
Quality quality_from_name(const std::string& name);

struct SampleOptions {
    bool labeled = true;
    /// Half-width of uniform reward noise, truncated to [0, 1]. Zero keeps the
    /// deterministic reward model.
    double reward_noise = 0.0;
    /// Draw trajectories with geometric restarts instead of i.i.d. pairs from
    /// the occupancy marginal.
    bool rollout = false;
};

/// Synthesizes a policy of the requested quality. `expert` is the greedy
/// optimal policy (ties to the lowest action index), `medium` mixes it with
/// the uniform policy, `soft_optimal` is a softmax over optimal Q.
TabularPolicy behavior_policy(const TabularMdp& mdp, const QualitySpec& spec);

/// Draws `num_transitions` samples: s from the policy's occupancy marginal,
/// a from the policy, s' from the dynamics. Reproducible from `seed`.
Dataset sample_dataset(const TabularMdp& mdp, const TabularPolicy& policy, int num_transitions,
                       std::uint64_t seed, const SampleOptions& options = {});

/// Concatenates datasets over the same state/action space; counts recomputed.
Dataset merge(const std::vector<Dataset>& datasets);

/// One labeled transition per state-action pair of a deterministic MDP, so
/// the empirical model reproduces the MDP exactly. Throws if any transition
/// row is not a point mass.
Dataset exhaustive_dataset(const TabularMdp& mdp);

/// CSV with header state,action,next_state,reward,task_id; reward empty for
/// unlabeled rows.
std::string dataset_to_csv(const Dataset& dataset);
Dataset dataset_from_csv(const std::string& text, int num_states, int num_actions,
                         std::string label = {});

/// JSON manifest carrying provenance label, seed, and shape.
std::string dataset_manifest(const Dataset& dataset, std::uint64_t seed);

} // namespace udslab
