#include "udslab/bounds.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

std::string fmt(double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.17g", x);
    return buffer;
}

} // namespace

std::string BoundReport::to_json() const {
    nlohmann::json j;
    j["term_a_reward_bias"] = term_a_reward_bias;
    j["term_b_sampling_error"] = term_b_sampling_error;
    j["term_c_policy_improvement"] = term_c_policy_improvement;
    j["zeta_err"] = zeta_err;
    j["j_true_learned"] = j_true_learned;
    j["j_true_behavior"] = j_true_behavior;
    j["j_empirical_learned"] = j_empirical_learned;
    j["guarantee_holds"] = guarantee_holds;
    j["delta"] = delta;
    j["c_r"] = c_r;
    j["c_p"] = c_p;
    return j.dump(2);
}

std::string BoundReport::csv_header() {
    return "term_a_reward_bias,term_b_sampling_error,term_c_policy_improvement,zeta_err,"
           "j_true_learned,j_true_behavior,j_empirical_learned,guarantee_holds,delta,c_r,c_p";
}

std::string BoundReport::to_csv_row() const {
    std::ostringstream out;
    out << fmt(term_a_reward_bias) << ',' << fmt(term_b_sampling_error) << ','
        << fmt(term_c_policy_improvement) << ',' << fmt(zeta_err) << ',' << fmt(j_true_learned)
        << ',' << fmt(j_true_behavior) << ',' << fmt(j_empirical_learned) << ','
        << (guarantee_holds ? 1 : 0) << ',' << fmt(delta) << ',' << fmt(c_r) << ',' << fmt(c_p);
    return out.str();
}

ConcentrationConstants concentration_constants(const IntMatrix& num_samples_table, double delta,
                                               double reward_range, ConcentrationModel model) {
    require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
    require(reward_range > 0.0, "reward range must be positive");
    require(model == ConcentrationModel::hoeffding, "unknown concentration model");
    const double num_states = static_cast<double>(num_samples_table.rows());
    const double num_actions = static_cast<double>(num_samples_table.cols());
    require(num_states > 0 && num_actions > 0, "count table must be non-empty");
    const double log_term = std::log(2.0 * num_states * num_actions / delta);
    ConcentrationConstants constants;
    // Two-sided Hoeffding for bounded rewards, union over all pairs.
    constants.c_r = reward_range * std::sqrt(log_term / 2.0);
    // L1 deviation of an empirical distribution over |S| outcomes, union over
    // all pairs.
    constants.c_p = std::sqrt(2.0 * (num_states * std::log(2.0) + log_term));
    return constants;
}

double reward_bias(const EffectiveDataset& effective, const TabularPolicy& learned_policy,
                   const Matrix& reward_error, double discount, const Vector& initial_dist) {
    require(reward_error.rows() == effective.num_states() &&
                reward_error.cols() == effective.num_actions(),
            "reward error table shape mismatch");
    const TabularMdp emp =
        empirical_mdp_from_effective(effective, discount, initial_dist, CoverageMode::lenient)
            .mdp;
    const Matrix d_behavior = occupancy(emp, effective.behavior).density;
    const Matrix d_learned = occupancy(emp, learned_policy).density;
    const double gap =
        ((d_behavior - d_learned).array() * reward_error.array()).sum();
    return gap / (1.0 - discount);
}

double sampling_error_bound(const EffectiveDataset& effective, const TabularPolicy& learned_policy,
                            double c_p, double c_r, double discount, const Vector& initial_dist) {
    const TabularMdp emp =
        empirical_mdp_from_effective(effective, discount, initial_dist, CoverageMode::lenient)
            .mdp;
    const Matrix d_learned = occupancy(emp, learned_policy).density;
    const Vector d_states = d_learned.rowwise().sum();
    const Vector divergence =
        divergence_per_state(learned_policy, effective.behavior, Divergence::cql);
    const double sqrt_actions = std::sqrt(static_cast<double>(emp.num_actions));
    const double horizon = 1.0 / (1.0 - discount);

    double transition_term = 0.0;
    std::vector<std::pair<int, int>> missing;
    for (int s = 0; s < emp.num_states; ++s) {
        if (d_states(s) <= 0.0) continue;
        const double n_s = effective.weighted_counts_s(s);
        if (n_s <= 0.0) {
            missing.emplace_back(s, -1);
            continue;
        }
        transition_term +=
            d_states(s) * sqrt_actions / std::sqrt(n_s) * std::sqrt(divergence(s) + 1.0);
    }
    if (!missing.empty()) {
        throw CoverageError("policy visits states with no effective data", missing);
    }
    transition_term *= 2.0 * discount * c_p * horizon * horizon;

    double reward_term = 0.0;
    for (int s = 0; s < emp.num_states; ++s) {
        for (int a = 0; a < emp.num_actions; ++a) {
            if (d_learned(s, a) <= 0.0) continue;
            const double labeled_count =
                effective.f_table(s, a) * effective.weighted_counts_sa(s, a);
            if (labeled_count <= 0.0) continue; // f = 0: no reward-label error here
            reward_term +=
                d_learned(s, a) * effective.f_table(s, a) / std::sqrt(labeled_count);
        }
    }
    reward_term *= 2.0 * c_r * horizon;
    return transition_term + reward_term;
}

BoundReport guarantee_report(const TabularMdp& mdp, const EffectiveDataset& effective,
                             const SolveResult& result, double delta, double alpha,
                             Divergence divergence) {
    BoundReport report;
    report.delta = delta;
    const ConcentrationConstants constants =
        concentration_constants(IntMatrix::Zero(mdp.num_states, mdp.num_actions), delta);
    report.c_r = constants.c_r;
    report.c_p = constants.c_p;

    const Matrix delta_r =
        ((1.0 - effective.f_table.array()) * mdp.reward.array()).matrix();
    report.term_a_reward_bias =
        reward_bias(effective, result.policy, delta_r, mdp.discount, mdp.initial_dist);
    report.term_b_sampling_error = sampling_error_bound(
        effective, result.policy, constants.c_p, constants.c_r, mdp.discount, mdp.initial_dist);
    report.term_c_policy_improvement =
        alpha == 0.0
            ? 0.0
            : alpha / (1.0 - mdp.discount) *
                  expected_divergence(result.empirical, result.policy, effective.behavior,
                                      divergence);
    report.zeta_err = report.term_a_reward_bias + report.term_b_sampling_error;
    report.j_true_learned = evaluate_return(mdp, result.policy);
    report.j_true_behavior = evaluate_return(mdp, effective.behavior);
    report.j_empirical_learned = result.empirical_return;
    report.guarantee_holds =
        report.j_true_learned >=
        report.j_true_behavior - report.zeta_err + report.term_c_policy_improvement;
    return report;
}

double reward_bias_objective(const Matrix& p, const Matrix& d_pi, const Matrix& d_L,
                             const Matrix& counts, const Matrix& reward) {
    require(p.rows() == d_pi.rows() && p.cols() == d_pi.cols(), "p shape mismatch");
    require(d_L.rows() == d_pi.rows() && d_L.cols() == d_pi.cols(), "d_L shape mismatch");
    require(counts.rows() == d_pi.rows() && counts.cols() == d_pi.cols(),
            "counts shape mismatch");
    require(reward.rows() == d_pi.rows() && reward.cols() == d_pi.cols(),
            "reward shape mismatch");
    const double total_counts = counts.sum();
    require(total_counts > 0.0, "counts must not be all zero");

    double behavior_return = 0.0;
    double ratio_term = 0.0;
    for (int s = 0; s < p.rows(); ++s) {
        for (int a = 0; a < p.cols(); ++a) {
            behavior_return += p(s, a) * reward(s, a);
            if (d_pi(s, a) > 0.0 && p(s, a) <= 0.0) {
                return std::numeric_limits<double>::infinity();
            }
            if (counts(s, a) > 0.0) {
                const double ratio = p(s, a) > 0.0 ? d_pi(s, a) / p(s, a) : 0.0;
                ratio_term += counts(s, a) * reward(s, a) * (ratio - 1.0);
            }
        }
    }
    return behavior_return + ratio_term / total_counts;
}

std::pair<double, double> reweight_constants(double labeled_size, double effective_size,
                                             double c_p, double discount) {
    require(labeled_size > 0.0 && effective_size > 0.0, "dataset sizes must be positive");
    require(discount >= 0.0 && discount < 1.0, "discount must lie in [0, 1)");
    const double horizon = 1.0 / (1.0 - discount);
    const double c1 = discount * c_p * horizon * horizon / std::sqrt(effective_size);
    const double c2 = labeled_size * horizon / effective_size;
    return {c1, c2};
}

} // namespace udslab
