#include "udslab/mdp.hpp"

#include "udslab/data.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace udslab {

namespace {

constexpr double kStochasticTol = 1e-12;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

void check_dims(const TabularMdp& mdp, const TabularPolicy& policy) {
    require(policy.probs.rows() == mdp.num_states && policy.probs.cols() == mdp.num_actions,
            "policy dimensions do not match MDP (" + std::to_string(policy.probs.rows()) + "x" +
                std::to_string(policy.probs.cols()) + " vs " + std::to_string(mdp.num_states) +
                "x" + std::to_string(mdp.num_actions) + ")");
}

} // namespace

TabularPolicy TabularPolicy::uniform(int num_states, int num_actions) {
    TabularPolicy policy;
    policy.probs = Matrix::Constant(num_states, num_actions, 1.0 / num_actions);
    return policy;
}

void TabularPolicy::validate() const {
    require(probs.rows() > 0 && probs.cols() > 0, "policy must be non-empty");
    require(probs.minCoeff() >= 0.0, "policy probabilities must be nonnegative");
    for (int s = 0; s < probs.rows(); ++s) {
        require(std::abs(probs.row(s).sum() - 1.0) <= kStochasticTol,
                "policy row " + std::to_string(s) + " does not sum to 1");
    }
}

void TabularMdp::validate() const {
    require(num_states > 0 && num_actions > 0, "MDP must have positive state/action counts");
    require(static_cast<int>(transition.size()) == num_actions,
            "transition tensor must have one matrix per action");
    require(reward.rows() == num_states && reward.cols() == num_actions,
            "reward table shape mismatch");
    require(reward.minCoeff() >= 0.0 && reward.maxCoeff() <= 1.0, "rewards must lie in [0, 1]");
    require(discount >= 0.0 && discount < 1.0, "discount must lie in [0, 1)");
    require(initial_dist.size() == num_states, "initial distribution length mismatch");
    require(initial_dist.minCoeff() >= 0.0, "initial distribution must be nonnegative");
    require(std::abs(initial_dist.sum() - 1.0) <= kStochasticTol,
            "initial distribution does not sum to 1");
    for (int a = 0; a < num_actions; ++a) {
        require(transition[a].rows() == num_states && transition[a].cols() == num_states,
                "transition matrix shape mismatch for action " + std::to_string(a));
        require(transition[a].minCoeff() >= 0.0, "transition probabilities must be nonnegative");
        for (int s = 0; s < num_states; ++s) {
            require(std::abs(transition[a].row(s).sum() - 1.0) <= kStochasticTol,
                    "transition row (s=" + std::to_string(s) + ", a=" + std::to_string(a) +
                        ") does not sum to 1");
        }
    }
}

Matrix policy_transition_matrix(const TabularMdp& mdp, const TabularPolicy& policy) {
    check_dims(mdp, policy);
    Matrix p = Matrix::Zero(mdp.num_states, mdp.num_states);
    for (int a = 0; a < mdp.num_actions; ++a) {
        p.noalias() += policy.probs.col(a).asDiagonal() * mdp.transition[a];
    }
    return p;
}

Vector policy_reward_vector(const TabularMdp& mdp, const TabularPolicy& policy) {
    check_dims(mdp, policy);
    return (policy.probs.array() * mdp.reward.array()).rowwise().sum();
}

Vector policy_values(const TabularMdp& mdp, const TabularPolicy& policy, const Matrix& reward) {
    check_dims(mdp, policy);
    require(reward.rows() == mdp.num_states && reward.cols() == mdp.num_actions,
            "reward override shape mismatch");
    const Matrix p_pi = policy_transition_matrix(mdp, policy);
    const Vector r_pi = (policy.probs.array() * reward.array()).rowwise().sum();
    const Matrix system =
        Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.discount * p_pi;
    return system.partialPivLu().solve(r_pi);
}

Vector policy_values(const TabularMdp& mdp, const TabularPolicy& policy) {
    return policy_values(mdp, policy, mdp.reward);
}

Matrix policy_q_values(const TabularMdp& mdp, const TabularPolicy& policy) {
    const Vector v = policy_values(mdp, policy);
    Matrix q(mdp.num_states, mdp.num_actions);
    for (int a = 0; a < mdp.num_actions; ++a) {
        q.col(a) = mdp.reward.col(a) + mdp.discount * (mdp.transition[a] * v);
    }
    return q;
}

double evaluate_return(const TabularMdp& mdp, const TabularPolicy& policy) {
    return mdp.initial_dist.dot(policy_values(mdp, policy));
}

OccupancyMeasure occupancy(const TabularMdp& mdp, const TabularPolicy& policy) {
    check_dims(mdp, policy);
    const Matrix p_pi = policy_transition_matrix(mdp, policy);
    const Matrix system =
        Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.discount * p_pi.transpose();
    const Vector state_density =
        system.partialPivLu().solve((1.0 - mdp.discount) * mdp.initial_dist);
    OccupancyMeasure result;
    result.density = state_density.asDiagonal() * policy.probs;
    return result;
}

Matrix optimal_q_values(const TabularMdp& mdp, double tol, int max_iters) {
    mdp.validate();
    Vector v = Vector::Zero(mdp.num_states);
    Matrix q(mdp.num_states, mdp.num_actions);
    for (int it = 0; it < max_iters; ++it) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            q.col(a) = mdp.reward.col(a) + mdp.discount * (mdp.transition[a] * v);
        }
        const Vector v_next = q.rowwise().maxCoeff();
        const double residual = (v_next - v).cwiseAbs().maxCoeff();
        v = v_next;
        if (residual <= tol) break;
    }
    // Polish: evaluate the greedy policy exactly so the returned Q solves the
    // Bellman system to solver precision rather than iteration precision.
    const TabularPolicy greedy = greedy_policy(q);
    const Vector v_exact = policy_values(mdp, greedy);
    for (int a = 0; a < mdp.num_actions; ++a) {
        q.col(a) = mdp.reward.col(a) + mdp.discount * (mdp.transition[a] * v_exact);
    }
    return q;
}

TabularPolicy greedy_policy(const Matrix& q_values) {
    TabularPolicy policy;
    policy.probs = Matrix::Zero(q_values.rows(), q_values.cols());
    for (int s = 0; s < q_values.rows(); ++s) {
        int best = 0;
        for (int a = 1; a < q_values.cols(); ++a) {
            if (q_values(s, a) > q_values(s, best)) best = a; // lowest index wins ties
        }
        policy.probs(s, best) = 1.0;
    }
    return policy;
}

EmpiricalMdpResult empirical_mdp(const Dataset& dataset, int num_states, int num_actions,
                                 double discount, const Vector& initial_dist, CoverageMode mode) {
    require(num_states > 0 && num_actions > 0, "state/action counts must be positive");
    std::vector<Matrix> counts(num_actions, Matrix::Zero(num_states, num_states));
    Matrix reward_sum = Matrix::Zero(num_states, num_actions);
    Matrix pair_count = Matrix::Zero(num_states, num_actions);
    for (const Transition& t : dataset.transitions) {
        require(t.state >= 0 && t.state < num_states && t.action >= 0 && t.action < num_actions &&
                    t.next_state >= 0 && t.next_state < num_states,
                "transition indices out of range");
        counts[t.action](t.state, t.next_state) += 1.0;
        pair_count(t.state, t.action) += 1.0;
        if (t.reward) reward_sum(t.state, t.action) += *t.reward;
    }

    EmpiricalMdpResult result;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            if (pair_count(s, a) == 0.0) result.uncovered.emplace_back(s, a);
        }
    }
    if (mode == CoverageMode::strict && !result.uncovered.empty()) {
        std::ostringstream msg;
        msg << "dataset does not cover " << result.uncovered.size() << " state-action pair(s):";
        for (std::size_t i = 0; i < result.uncovered.size() && i < 8; ++i) {
            msg << " (" << result.uncovered[i].first << "," << result.uncovered[i].second << ")";
        }
        if (result.uncovered.size() > 8) msg << " ...";
        throw CoverageError(msg.str(), result.uncovered);
    }

    TabularMdp& mdp = result.mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.initial_dist = initial_dist;
    mdp.reward = Matrix::Zero(num_states, num_actions);
    mdp.transition.assign(num_actions, Matrix::Zero(num_states, num_states));
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            if (pair_count(s, a) > 0.0) {
                mdp.transition[a].row(s) = counts[a].row(s) / pair_count(s, a);
                mdp.reward(s, a) = reward_sum(s, a) / pair_count(s, a);
            } else {
                mdp.transition[a](s, s) = 1.0; // lenient fallback: absorbing, zero reward
            }
        }
    }
    return result;
}

double d_cql(const Vector& p, const Vector& q) {
    require(p.size() == q.size(), "distributions must have the same length");
    double total = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        if (p(i) == 0.0) continue;
        if (q(i) <= 0.0) {
            throw SupportError(
                "support violation: p > 0 where q = 0 at index " + std::to_string(i), i);
        }
        total += p(i) * (p(i) / q(i) - 1.0);
    }
    return total;
}

std::string mdp_to_json(const TabularMdp& mdp) {
    nlohmann::json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["discount"] = mdp.discount;
    std::vector<double> transition;
    transition.reserve(static_cast<std::size_t>(mdp.num_states) * mdp.num_actions *
                       mdp.num_states);
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                transition.push_back(mdp.transition[a](s, s2));
            }
        }
    }
    j["transition"] = transition;
    std::vector<double> reward;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) reward.push_back(mdp.reward(s, a));
    }
    j["reward"] = reward;
    j["initial_dist"] = std::vector<double>(mdp.initial_dist.data(),
                                            mdp.initial_dist.data() + mdp.initial_dist.size());
    return j.dump(2);
}

TabularMdp mdp_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    TabularMdp mdp;
    mdp.num_states = j.at("num_states").get<int>();
    mdp.num_actions = j.at("num_actions").get<int>();
    mdp.discount = j.at("discount").get<double>();
    const auto transition = j.at("transition").get<std::vector<double>>();
    const auto reward = j.at("reward").get<std::vector<double>>();
    const auto initial = j.at("initial_dist").get<std::vector<double>>();
    require(static_cast<int>(transition.size()) ==
                mdp.num_states * mdp.num_actions * mdp.num_states,
            "transition array length mismatch");
    require(static_cast<int>(reward.size()) == mdp.num_states * mdp.num_actions,
            "reward array length mismatch");
    require(static_cast<int>(initial.size()) == mdp.num_states,
            "initial_dist array length mismatch");
    mdp.transition.assign(mdp.num_actions, Matrix::Zero(mdp.num_states, mdp.num_states));
    mdp.reward = Matrix::Zero(mdp.num_states, mdp.num_actions);
    std::size_t idx = 0;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) {
            for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                mdp.transition[a](s, s2) = transition[idx++];
            }
        }
    }
    idx = 0;
    for (int s = 0; s < mdp.num_states; ++s) {
        for (int a = 0; a < mdp.num_actions; ++a) mdp.reward(s, a) = reward[idx++];
    }
    mdp.initial_dist = Eigen::Map<const Vector>(initial.data(), mdp.num_states);
    mdp.validate();
    return mdp;
}

} // namespace udslab
