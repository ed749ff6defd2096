#include "udslab/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

} // namespace

Dataset Dataset::from_transitions(int num_states, int num_actions,
                                  std::vector<Transition> transitions, std::string label) {
    require(num_states > 0 && num_actions > 0, "state/action counts must be positive");
    Dataset dataset;
    dataset.counts_sa = IntMatrix::Zero(num_states, num_actions);
    dataset.counts_s = IntVector::Zero(num_states);
    for (const Transition& t : transitions) {
        require(t.state >= 0 && t.state < num_states && t.action >= 0 && t.action < num_actions &&
                    t.next_state >= 0 && t.next_state < num_states,
                "transition indices out of range");
        if (t.reward) {
            require(*t.reward >= 0.0 && *t.reward <= 1.0, "reward labels must lie in [0, 1]");
        }
        dataset.counts_sa(t.state, t.action) += 1;
        dataset.counts_s(t.state) += 1;
    }
    dataset.transitions = std::move(transitions);
    dataset.label = std::move(label);
    return dataset;
}

const char* quality_name(Quality kind) {
    switch (kind) {
    case Quality::expert: return "expert";
    case Quality::medium: return "medium";
    case Quality::random: return "random";
    case Quality::soft_optimal: return "soft_optimal";
    }
    return "unknown";
}

Quality quality_from_name(const std::string& name) {
    if (name == "expert") return Quality::expert;
    if (name == "medium") return Quality::medium;
    if (name == "random") return Quality::random;
    if (name == "soft_optimal") return Quality::soft_optimal;
    throw std::invalid_argument("unknown quality kind: " + name);
}

TabularPolicy behavior_policy(const TabularMdp& mdp, const QualitySpec& spec) {
    require(spec.epsilon >= 0.0 && spec.epsilon <= 1.0, "epsilon must lie in [0, 1]");
    require(spec.temperature > 0.0, "temperature must be positive");
    switch (spec.kind) {
    case Quality::random:
        return TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    case Quality::expert:
        return greedy_policy(optimal_q_values(mdp));
    case Quality::medium: {
        const TabularPolicy expert = greedy_policy(optimal_q_values(mdp));
        TabularPolicy policy;
        policy.probs = (1.0 - spec.epsilon) * expert.probs +
                       spec.epsilon * Matrix::Constant(mdp.num_states, mdp.num_actions,
                                                       1.0 / mdp.num_actions);
        return policy;
    }
    case Quality::soft_optimal: {
        const Matrix q = optimal_q_values(mdp);
        TabularPolicy policy;
        policy.probs = Matrix::Zero(mdp.num_states, mdp.num_actions);
        for (int s = 0; s < mdp.num_states; ++s) {
            const Vector logits = q.row(s).transpose() / spec.temperature;
            const Vector shifted = (logits.array() - logits.maxCoeff()).exp();
            policy.probs.row(s) = (shifted / shifted.sum()).transpose();
        }
        return policy;
    }
    }
    throw std::invalid_argument("unknown quality kind");
}

Dataset sample_dataset(const TabularMdp& mdp, const TabularPolicy& policy, int num_transitions,
                       std::uint64_t seed, const SampleOptions& options) {
    require(num_transitions >= 1, "num_transitions must be >= 1");
    mdp.validate();
    policy.validate();
    require(policy.probs.rows() == mdp.num_states && policy.probs.cols() == mdp.num_actions,
            "policy dimensions do not match MDP");

    Rng rng(seed);
    std::vector<Transition> transitions;
    transitions.reserve(num_transitions);

    auto draw_reward = [&](int s, int a) -> double {
        double r = mdp.reward(s, a);
        if (options.reward_noise > 0.0) {
            r = clamp01(r + rng.uniform(-options.reward_noise, options.reward_noise));
        }
        return r;
    };

    if (options.rollout) {
        // Trajectory mode: restart with probability (1 - discount) so state
        // visitation matches the discounted occupancy in the long run.
        int s = rng.categorical(mdp.initial_dist);
        for (int i = 0; i < num_transitions; ++i) {
            const int a = rng.categorical(policy.probs.row(s).transpose());
            const int s2 = rng.categorical(mdp.transition[a].row(s).transpose());
            Transition t;
            t.state = s;
            t.action = a;
            t.next_state = s2;
            if (options.labeled) t.reward = draw_reward(s, a);
            transitions.push_back(t);
            s = (rng.uniform01() < 1.0 - mdp.discount) ? rng.categorical(mdp.initial_dist) : s2;
        }
    } else {
        const Vector state_marginal = occupancy(mdp, policy).state_marginal();
        for (int i = 0; i < num_transitions; ++i) {
            const int s = rng.categorical(state_marginal);
            const int a = rng.categorical(policy.probs.row(s).transpose());
            const int s2 = rng.categorical(mdp.transition[a].row(s).transpose());
            Transition t;
            t.state = s;
            t.action = a;
            t.next_state = s2;
            if (options.labeled) t.reward = draw_reward(s, a);
            transitions.push_back(t);
        }
    }
    return Dataset::from_transitions(mdp.num_states, mdp.num_actions, std::move(transitions));
}

Dataset merge(const std::vector<Dataset>& datasets) {
    require(!datasets.empty(), "merge requires at least one dataset");
    const int num_states = datasets.front().num_states();
    const int num_actions = datasets.front().num_actions();
    std::vector<Transition> merged;
    std::string label;
    for (const Dataset& d : datasets) {
        require(d.num_states() == num_states && d.num_actions() == num_actions,
                "datasets must share the same state/action space");
        merged.insert(merged.end(), d.transitions.begin(), d.transitions.end());
        if (!d.label.empty()) {
            if (!label.empty()) label += "+";
            label += d.label;
        }
    }
    return Dataset::from_transitions(num_states, num_actions, std::move(merged), label);
}

Dataset exhaustive_dataset(const TabularMdp& mdp) {
    std::vector<Transition> transitions;
    transitions.reserve(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            int s2 = -1;
            for (int j = 0; j < mdp.num_states; ++j) {
                if (mdp.transition[a](s, j) == 1.0) s2 = j;
            }
            require(s2 >= 0, "exhaustive_dataset requires deterministic transitions");
            Transition t;
            t.state = s;
            t.action = a;
            t.next_state = s2;
            t.reward = mdp.reward(s, a);
            transitions.push_back(t);
        }
    }
    return Dataset::from_transitions(mdp.num_states, mdp.num_actions, std::move(transitions),
                                     "exhaustive");
}

std::string dataset_to_csv(const Dataset& dataset) {
    std::ostringstream out;
    out << "state,action,next_state,reward,task_id\n";
    char buffer[64];
    for (const Transition& t : dataset.transitions) {
        out << t.state << ',' << t.action << ',' << t.next_state << ',';
        if (t.reward) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", *t.reward);
            out << buffer;
        }
        out << ',';
        if (t.task_id) out << *t.task_id;
        out << '\n';
    }
    return out.str();
}

Dataset dataset_from_csv(const std::string& text, int num_states, int num_actions,
                         std::string label) {
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), "empty CSV input");
    std::vector<Transition> transitions;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        Transition t;
        std::getline(row, cell, ',');
        t.state = std::stoi(cell);
        std::getline(row, cell, ',');
        t.action = std::stoi(cell);
        std::getline(row, cell, ',');
        t.next_state = std::stoi(cell);
        std::getline(row, cell, ',');
        if (!cell.empty()) t.reward = std::stod(cell);
        if (std::getline(row, cell, ',') && !cell.empty()) t.task_id = std::stoi(cell);
        transitions.push_back(t);
    }
    return Dataset::from_transitions(num_states, num_actions, std::move(transitions),
                                     std::move(label));
}

std::string dataset_manifest(const Dataset& dataset, std::uint64_t seed) {
    nlohmann::json j;
    j["label"] = dataset.label;
    j["seed"] = seed;
    j["num_states"] = dataset.num_states();
    j["num_actions"] = dataset.num_actions();
    j["size"] = dataset.size();
    return j.dump(2);
}

} // namespace udslab
