#include "udslab/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

/// Per-action penalty whose expectation under pi(.|s) equals
/// alpha * D(pi, behavior)(s); this is the modified-reward form that makes
/// penalized evaluation reproduce the regularized objective exactly.
double action_penalty(double pi, double beta, double alpha, Divergence divergence) {
    if (alpha == 0.0) return 0.0;
    if (beta <= 0.0) {
        if (pi > 0.0) return std::numeric_limits<double>::infinity();
        return 0.0;
    }
    switch (divergence) {
    case Divergence::cql: return alpha * (pi / beta - 1.0);
    case Divergence::kl: return pi > 0.0 ? alpha * std::log(pi / beta) : 0.0;
    }
    return 0.0;
}

/// Exact penalized evaluation: V = (I - gamma P_pi)^{-1} (r_pi - pen_pi).
Vector penalized_values(const TabularMdp& mdp, const TabularPolicy& policy,
                        const TabularPolicy& behavior, double alpha, Divergence divergence) {
    const Vector pen =
        alpha == 0.0 ? Vector::Zero(mdp.num_states)
                     : (alpha * divergence_per_state(policy, behavior, divergence)).eval();
    const Matrix p_pi = policy_transition_matrix(mdp, policy);
    const Vector r_pi = policy_reward_vector(mdp, policy) - pen;
    const Matrix system = Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.discount * p_pi;
    return system.partialPivLu().solve(r_pi);
}

Vector greedy_row(const Vector& q) {
    int best = 0;
    for (int a = 1; a < q.size(); ++a) {
        if (q(a) > q(best)) best = a; // lowest index wins ties
    }
    Vector pi = Vector::Zero(q.size());
    pi(best) = 1.0;
    return pi;
}

/// One-step improvement for the cql penalty:
///   max_pi  sum_a pi_a (q_a + alpha) - alpha sum_a pi_a^2 / beta_a
/// over the simplex, with pi_a = 0 forced wherever beta_a = 0. Solved by the
/// water-filling sweep over actions sorted by q.
Vector improve_state_cql(const Vector& q, const Vector& beta, double alpha) {
    if (alpha == 0.0) return greedy_row(q);
    const int num_actions = static_cast<int>(q.size());
    std::vector<int> order;
    order.reserve(num_actions);
    for (int a = 0; a < num_actions; ++a) {
        if (beta(a) > 0.0) order.push_back(a);
    }
    require(!order.empty(), "behavior row has no support");
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return q(a) > q(b); });

    double lambda = q(order[0]) + alpha - 2.0 * alpha / beta(order[0]);
    double weight_sum = 0.0;
    double score_sum = 0.0;
    for (const int a : order) {
        weight_sum += beta(a);
        score_sum += beta(a) * (q(a) + alpha);
        const double candidate = (score_sum - 2.0 * alpha) / weight_sum;
        if (q(a) + alpha - candidate > 0.0) lambda = candidate;
    }
    Vector pi = Vector::Zero(num_actions);
    for (int a = 0; a < num_actions; ++a) {
        if (beta(a) > 0.0) {
            pi(a) = std::max(0.0, beta(a) * (q(a) + alpha - lambda) / (2.0 * alpha));
        }
    }
    return pi / pi.sum();
}

/// One-step improvement for the kl penalty: pi proportional to
/// beta * exp(q / alpha), restricted to the behavior support.
Vector improve_state_kl(const Vector& q, const Vector& beta, double alpha) {
    if (alpha == 0.0) return greedy_row(q);
    const int num_actions = static_cast<int>(q.size());
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < num_actions; ++a) {
        if (beta(a) > 0.0) max_logit = std::max(max_logit, q(a) / alpha);
    }
    Vector pi = Vector::Zero(num_actions);
    for (int a = 0; a < num_actions; ++a) {
        if (beta(a) > 0.0) pi(a) = beta(a) * std::exp(q(a) / alpha - max_logit);
    }
    return pi / pi.sum();
}

Matrix modified_reward(const TabularMdp& emp, const TabularPolicy& policy,
                       const TabularPolicy& behavior, double alpha, Divergence divergence) {
    Matrix r = emp.reward;
    for (int s = 0; s < emp.num_states; ++s) {
        for (int a = 0; a < emp.num_actions; ++a) {
            r(s, a) -= action_penalty(policy.probs(s, a), behavior.probs(s, a), alpha, divergence);
        }
    }
    return r;
}

} // namespace

const char* divergence_name(Divergence divergence) {
    return divergence == Divergence::cql ? "cql" : "kl";
}

Divergence divergence_from_name(const std::string& name) {
    if (name == "cql") return Divergence::cql;
    if (name == "kl") return Divergence::kl;
    throw std::invalid_argument("unknown divergence: " + name);
}

void ConservativeConfig::validate() const {
    require(alpha >= 0.0, "alpha must be nonnegative");
    require(max_iters >= 1, "max_iters must be positive");
    require(tol > 0.0, "tol must be positive");
}

EmpiricalMdpResult empirical_mdp_from_effective(const EffectiveDataset& effective,
                                                double discount, const Vector& initial_dist,
                                                CoverageMode mode) {
    const int num_states = effective.num_states();
    const int num_actions = effective.num_actions();
    require(initial_dist.size() == num_states, "initial distribution length mismatch");

    std::vector<Matrix> counts(num_actions, Matrix::Zero(num_states, num_states));
    for (const WeightedTransition& t : effective.transitions) {
        if (t.weight > 0.0) counts[t.action](t.state, t.next_state) += t.weight;
    }

    EmpiricalMdpResult result;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            if (effective.weighted_counts_sa(s, a) <= 0.0) result.uncovered.emplace_back(s, a);
        }
    }
    if (mode == CoverageMode::strict && !result.uncovered.empty()) {
        std::ostringstream msg;
        msg << "effective dataset does not cover " << result.uncovered.size()
            << " state-action pair(s)";
        throw CoverageError(msg.str(), result.uncovered);
    }

    TabularMdp& mdp = result.mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.initial_dist = initial_dist;
    mdp.reward = effective.r_eff_table;
    mdp.transition.assign(num_actions, Matrix::Zero(num_states, num_states));
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            const double w = effective.weighted_counts_sa(s, a);
            if (w > 0.0) {
                mdp.transition[a].row(s) = counts[a].row(s) / w;
            } else {
                mdp.transition[a](s, s) = 1.0;
            }
        }
    }
    mdp.validate();
    return result;
}

Vector divergence_per_state(const TabularPolicy& policy, const TabularPolicy& behavior,
                            Divergence divergence) {
    require(policy.probs.rows() == behavior.probs.rows() &&
                policy.probs.cols() == behavior.probs.cols(),
            "policy/behavior shape mismatch");
    const int num_states = policy.num_states();
    Vector out(num_states);
    for (int s = 0; s < num_states; ++s) {
        if (divergence == Divergence::cql) {
            out(s) = d_cql(policy.probs.row(s).transpose(), behavior.probs.row(s).transpose());
        } else {
            double total = 0.0;
            for (int a = 0; a < policy.num_actions(); ++a) {
                const double pi = policy.probs(s, a);
                if (pi == 0.0) continue;
                const double beta = behavior.probs(s, a);
                if (beta <= 0.0) {
                    throw SupportError("policy weights an action outside the behavior support",
                                       a);
                }
                total += pi * std::log(pi / beta);
            }
            out(s) = total;
        }
    }
    return out;
}

double expected_divergence(const TabularMdp& mdp, const TabularPolicy& policy,
                           const TabularPolicy& behavior, Divergence divergence) {
    const Vector marginal = occupancy(mdp, policy).state_marginal();
    return marginal.dot(divergence_per_state(policy, behavior, divergence));
}

double regularized_objective(const TabularMdp& mdp, const TabularPolicy& policy,
                             const TabularPolicy& behavior, double alpha, Divergence divergence) {
    const double penalty =
        alpha == 0.0 ? 0.0 : expected_divergence(mdp, policy, behavior, divergence);
    return evaluate_return(mdp, policy) - alpha / (1.0 - mdp.discount) * penalty;
}

SolveResult solve_conservative(const EffectiveDataset& effective, const ConservativeConfig& config,
                               double discount, const Vector& initial_dist) {
    config.validate();
    const CoverageMode mode =
        config.strict_coverage ? CoverageMode::strict : CoverageMode::lenient;
    EmpiricalMdpResult empirical = empirical_mdp_from_effective(effective, discount,
                                                                initial_dist, mode);
    const TabularMdp& emp = empirical.mdp;
    const TabularPolicy& behavior = effective.behavior;

    SolveResult result;
    result.policy = behavior;
    result.converged = false;

    const int num_states = emp.num_states;
    const int num_actions = emp.num_actions;
    Matrix next_probs(num_states, num_actions);
    for (int it = 0; it < config.max_iters; ++it) {
        const Vector values = penalized_values(emp, result.policy, behavior, config.alpha,
                                               config.divergence);
        result.objective_trace.push_back(emp.initial_dist.dot(values));

        // Improvement target: raw reward plus the penalized continuation.
        Matrix q(num_states, num_actions);
        for (int a = 0; a < num_actions; ++a) {
            q.col(a) = emp.reward.col(a) + emp.discount * (emp.transition[a] * values);
        }
        for (int s = 0; s < num_states; ++s) {
            const Vector q_row = q.row(s).transpose();
            const Vector beta_row = behavior.probs.row(s).transpose();
            next_probs.row(s) = (config.divergence == Divergence::cql
                                     ? improve_state_cql(q_row, beta_row, config.alpha)
                                     : improve_state_kl(q_row, beta_row, config.alpha))
                                    .transpose();
        }
        const double delta = (next_probs - result.policy.probs).cwiseAbs().maxCoeff();
        result.policy.probs = next_probs;
        result.iterations = it + 1;
        if (delta < config.tol) {
            result.converged = true;
            break;
        }
    }

    const Vector penalized = penalized_values(emp, result.policy, behavior, config.alpha,
                                              config.divergence);
    result.objective_trace.push_back(emp.initial_dist.dot(penalized));
    const Vector plain = policy_values(emp, result.policy);
    result.q_values = Matrix(num_states, num_actions);
    result.conservative_q = modified_reward(emp, result.policy, behavior, config.alpha,
                                            config.divergence);
    for (int a = 0; a < num_actions; ++a) {
        result.q_values.col(a) = emp.reward.col(a) + emp.discount * (emp.transition[a] * plain);
        result.conservative_q.col(a) += emp.discount * (emp.transition[a] * penalized);
    }
    result.empirical_return = emp.initial_dist.dot(plain);
    try {
        result.divergence_value =
            expected_divergence(emp, result.policy, behavior, config.divergence);
    } catch (const SupportError&) {
        // Possible only for alpha = 0, where the greedy solution may step
        // outside the behavior support; the divergence is infinite there.
        result.divergence_value = std::numeric_limits<double>::infinity();
    }
    result.empirical = emp;
    return result;
}

std::string solve_result_to_json(const SolveResult& result) {
    auto flatten = [](const Matrix& m) {
        std::vector<double> out;
        out.reserve(m.size());
        for (int r = 0; r < m.rows(); ++r) {
            for (int c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
        }
        return out;
    };
    nlohmann::json j;
    j["num_states"] = result.policy.num_states();
    j["num_actions"] = result.policy.num_actions();
    j["policy"] = flatten(result.policy.probs);
    j["q_values"] = flatten(result.q_values);
    j["conservative_q"] = flatten(result.conservative_q);
    j["empirical_return"] = result.empirical_return;
    j["divergence_value"] = result.divergence_value;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    j["objective_trace"] = result.objective_trace;
    return j.dump(2);
}

Matrix conservative_q(const EffectiveDataset& effective, const TabularPolicy& policy,
                      double alpha, double discount) {
    require(alpha >= 0.0, "alpha must be nonnegative");
    require(policy.probs.rows() == effective.num_states() &&
                policy.probs.cols() == effective.num_actions(),
            "policy dimensions do not match the effective dataset");
    for (int s = 0; s < effective.num_states(); ++s) {
        for (int a = 0; a < effective.num_actions(); ++a) {
            if (policy.probs(s, a) > 0.0 && effective.behavior.probs(s, a) <= 0.0) {
                throw SupportError("policy weights an action the effective behavior never took",
                                   a);
            }
        }
    }
    const Vector uniform_init =
        Vector::Constant(effective.num_states(), 1.0 / effective.num_states());
    const TabularMdp emp =
        empirical_mdp_from_effective(effective, discount, uniform_init, CoverageMode::lenient)
            .mdp;
    const Vector values =
        penalized_values(emp, policy, effective.behavior, alpha, Divergence::cql);
    Matrix q = modified_reward(emp, policy, effective.behavior, alpha, Divergence::cql);
    for (int a = 0; a < emp.num_actions; ++a) {
        q.col(a) += emp.discount * (emp.transition[a] * values);
    }
    return q;
}

} // namespace udslab
