#include "udslab/relabel.hpp"

#include "udslab/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

/// k-percentile with linear interpolation between order statistics, so k=50
/// matches the textbook median.
double percentile(std::vector<double> values, double k) {
    require(!values.empty(), "percentile of an empty set is undefined");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values.front();
    const double rank = k / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<WeightedTransition> weight_labeled(const Dataset& labeled) {
    std::vector<WeightedTransition> out;
    out.reserve(labeled.transitions.size());
    for (const Transition& t : labeled.transitions) {
        require(t.reward.has_value(), "labeled dataset contains a transition without a reward");
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = 1.0;
        w.assigned_reward = *t.reward;
        w.labeled = true;
        out.push_back(w);
    }
    return out;
}

void check_unlabeled(const Dataset& unlabeled) {
    for (const Transition& t : unlabeled.transitions) {
        require(!t.reward.has_value(),
                "unlabeled dataset carries a reward label; rewards must be unavailable");
    }
}

void check_same_space(const Dataset& a, const Dataset& b) {
    require(a.num_states() == b.num_states() && a.num_actions() == b.num_actions(),
            "datasets must share the same state/action space");
}

} // namespace

EffectiveDataset finalize_effective(int num_states, int num_actions,
                                    std::vector<WeightedTransition> transitions) {
    EffectiveDataset eff;
    eff.f_table = Matrix::Ones(num_states, num_actions);
    eff.r_eff_table = Matrix::Zero(num_states, num_actions);
    eff.counts_eff = IntMatrix::Zero(num_states, num_actions);
    eff.weighted_counts_sa = Matrix::Zero(num_states, num_actions);
    eff.weighted_counts_s = Vector::Zero(num_states);

    Matrix labeled_weight = Matrix::Zero(num_states, num_actions);
    Matrix reward_weight = Matrix::Zero(num_states, num_actions);
    for (const WeightedTransition& t : transitions) {
        require(t.state >= 0 && t.state < num_states && t.action >= 0 && t.action < num_actions,
                "weighted transition indices out of range");
        require(t.weight >= 0.0 && t.weight <= 1.0, "weights must lie in [0, 1]");
        require(t.assigned_reward >= 0.0 && t.assigned_reward <= 1.0,
                "assigned rewards must lie in [0, 1]");
        if (t.weight == 0.0) continue;
        eff.counts_eff(t.state, t.action) += 1;
        eff.weighted_counts_sa(t.state, t.action) += t.weight;
        eff.weighted_counts_s(t.state) += t.weight;
        reward_weight(t.state, t.action) += t.weight * t.assigned_reward;
        if (t.labeled) labeled_weight(t.state, t.action) += t.weight;
    }
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            const double w = eff.weighted_counts_sa(s, a);
            if (w > 0.0) {
                eff.f_table(s, a) = labeled_weight(s, a) / w;
                eff.r_eff_table(s, a) = reward_weight(s, a) / w;
            }
        }
    }
    eff.behavior.probs = Matrix::Constant(num_states, num_actions, 1.0 / num_actions);
    for (int s = 0; s < num_states; ++s) {
        if (eff.weighted_counts_s(s) > 0.0) {
            eff.behavior.probs.row(s) =
                eff.weighted_counts_sa.row(s) / eff.weighted_counts_s(s);
        }
    }
    eff.transitions = std::move(transitions);
    return eff;
}

std::string EffectiveDataset::to_csv() const {
    std::ostringstream out;
    out << "state,action,next_state,reward,task_id,weight,assigned_reward\n";
    char buffer[64];
    for (const WeightedTransition& t : transitions) {
        out << t.state << ',' << t.action << ',' << t.next_state << ',';
        if (t.labeled) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", t.assigned_reward);
            out << buffer;
        }
        out << ',' << ','; // task_id column kept for schema compatibility
        std::snprintf(buffer, sizeof(buffer), "%.17g", t.weight);
        out << buffer << ',';
        std::snprintf(buffer, sizeof(buffer), "%.17g", t.assigned_reward);
        out << buffer << '\n';
    }
    return out.str();
}

const char* strategy_name(StrategyKind kind) {
    switch (kind) {
    case StrategyKind::no_sharing: return "no_sharing";
    case StrategyKind::sharing_all: return "sharing_all";
    case StrategyKind::uds: return "uds";
    case StrategyKind::reward_predictor: return "reward_predictor";
    case StrategyKind::cds_filter: return "cds_filter";
    case StrategyKind::cds_soft: return "cds_soft";
    case StrategyKind::cds_uds: return "cds_uds";
    case StrategyKind::optimal_reweight: return "optimal_reweight";
    }
    return "unknown";
}

StrategyKind strategy_from_name(const std::string& name) {
    if (name == "no_sharing") return StrategyKind::no_sharing;
    if (name == "sharing_all") return StrategyKind::sharing_all;
    if (name == "uds") return StrategyKind::uds;
    if (name == "reward_predictor") return StrategyKind::reward_predictor;
    if (name == "cds_filter") return StrategyKind::cds_filter;
    if (name == "cds_soft") return StrategyKind::cds_soft;
    if (name == "cds_uds") return StrategyKind::cds_uds;
    if (name == "optimal_reweight") return StrategyKind::optimal_reweight;
    throw std::invalid_argument("unknown strategy kind: " + name);
}

void StrategySpec::validate() const {
    require(k_percentile >= 0.0 && k_percentile <= 100.0, "k_percentile must lie in [0, 100]");
    require(temperature_decay > 0.0 && temperature_decay <= 1.0,
            "temperature_decay must lie in (0, 1]");
    require(temperature_clip_min >= 0.0 && temperature_clip_max >= temperature_clip_min,
            "temperature clip range is invalid");
    require(predictor_smoothing >= 0.0, "predictor_smoothing must be nonnegative");
}

EffectiveDataset apply_uds(const Dataset& labeled, const Dataset& unlabeled) {
    check_same_space(labeled, unlabeled);
    check_unlabeled(unlabeled);
    std::vector<WeightedTransition> merged = weight_labeled(labeled);
    merged.reserve(merged.size() + unlabeled.transitions.size());
    for (const Transition& t : unlabeled.transitions) {
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = 1.0;
        w.assigned_reward = 0.0;
        w.labeled = false;
        merged.push_back(w);
    }
    return finalize_effective(labeled.num_states(), labeled.num_actions(), std::move(merged));
}

EffectiveDataset apply_sharing_all(const Dataset& labeled, const Dataset& unlabeled,
                                   const TabularMdp& oracle) {
    check_same_space(labeled, unlabeled);
    check_unlabeled(unlabeled);
    require(oracle.num_states == labeled.num_states() &&
                oracle.num_actions == labeled.num_actions(),
            "oracle MDP does not match the dataset space");
    std::vector<WeightedTransition> merged = weight_labeled(labeled);
    for (const Transition& t : unlabeled.transitions) {
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = 1.0;
        w.assigned_reward = oracle.reward(t.state, t.action);
        w.labeled = false;
        merged.push_back(w);
    }
    return finalize_effective(labeled.num_states(), labeled.num_actions(), std::move(merged));
}

Matrix fit_reward_predictor(const Dataset& labeled, double smoothing) {
    require(!labeled.transitions.empty(), "reward predictor needs a nonempty labeled dataset");
    require(smoothing >= 0.0, "smoothing must be nonnegative");
    const int num_states = labeled.num_states();
    const int num_actions = labeled.num_actions();
    Matrix sums = Matrix::Zero(num_states, num_actions);
    Matrix counts = Matrix::Zero(num_states, num_actions);
    double global_sum = 0.0;
    for (const Transition& t : labeled.transitions) {
        require(t.reward.has_value(), "labeled dataset contains a transition without a reward");
        sums(t.state, t.action) += *t.reward;
        counts(t.state, t.action) += 1.0;
        global_sum += *t.reward;
    }
    const double prior = global_sum / static_cast<double>(labeled.transitions.size());
    Matrix predictor(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            const double denom = counts(s, a) + smoothing;
            predictor(s, a) = denom > 0.0
                                  ? (sums(s, a) + smoothing * prior) / denom
                                  : prior;
            predictor(s, a) = std::clamp(predictor(s, a), 0.0, 1.0);
        }
    }
    return predictor;
}

EffectiveDataset apply_reward_predictor(const Dataset& labeled, const Dataset& unlabeled,
                                        const Matrix& predictor) {
    check_same_space(labeled, unlabeled);
    check_unlabeled(unlabeled);
    require(predictor.rows() == labeled.num_states() &&
                predictor.cols() == labeled.num_actions(),
            "predictor table shape mismatch");
    std::vector<WeightedTransition> merged = weight_labeled(labeled);
    for (const Transition& t : unlabeled.transitions) {
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = 1.0;
        w.assigned_reward = std::clamp(predictor(t.state, t.action), 0.0, 1.0);
        w.labeled = false;
        merged.push_back(w);
    }
    return finalize_effective(labeled.num_states(), labeled.num_actions(), std::move(merged));
}

CdsWeights cds_weights(const Dataset& candidate, const Dataset& reference,
                       const Matrix& conservative_q, const StrategySpec& spec, CdsMode mode) {
    spec.validate();
    require(!reference.transitions.empty(),
            "cds_weights needs a nonempty reference set to define the percentile");
    std::vector<double> reference_q;
    reference_q.reserve(reference.transitions.size());
    for (const Transition& t : reference.transitions) {
        reference_q.push_back(conservative_q(t.state, t.action));
    }
    CdsWeights out;
    out.threshold = percentile(std::move(reference_q), spec.k_percentile);

    std::vector<double> gaps;
    gaps.reserve(candidate.transitions.size());
    for (const Transition& t : candidate.transitions) {
        gaps.push_back(conservative_q(t.state, t.action) - out.threshold);
    }
    out.weights.reserve(gaps.size());
    if (mode == CdsMode::hard) {
        for (const double gap : gaps) out.weights.push_back(gap >= 0.0 ? 1.0 : 0.0);
        return out;
    }

    // Soft mode: tau starts at the mean |gap| of this batch and decays per
    // transition, processed in dataset order for determinism.
    double tau = 0.0;
    for (const double gap : gaps) tau += std::abs(gap);
    tau = gaps.empty() ? 0.0 : tau / static_cast<double>(gaps.size());
    for (const double gap : gaps) {
        const double clipped =
            std::clamp(tau, spec.temperature_clip_min, spec.temperature_clip_max);
        double weight;
        if (clipped > 0.0) {
            weight = 1.0 / (1.0 + std::exp(-gap / clipped));
        } else {
            weight = gap >= 0.0 ? 1.0 : 0.0; // zero-temperature limit
        }
        out.weights.push_back(weight);
        tau = spec.temperature_decay * tau + (1.0 - spec.temperature_decay) * std::abs(gap);
    }
    return out;
}

namespace {

EffectiveDataset apply_cds(const StrategySpec& spec, const Dataset& labeled,
                           const Dataset& unlabeled, const StrategyContext& context,
                           CdsMode mode, bool zero_reward) {
    require(context.conservative_q != nullptr,
            "CDS strategies need a conservative Q table in the context");
    if (!zero_reward) {
        require(context.oracle_mdp != nullptr,
                "CDS with true-reward relabeling needs the oracle MDP in the context");
    }
    const CdsWeights weights = cds_weights(unlabeled, labeled, *context.conservative_q, spec, mode);
    std::vector<WeightedTransition> merged = weight_labeled(labeled);
    for (std::size_t i = 0; i < unlabeled.transitions.size(); ++i) {
        const Transition& t = unlabeled.transitions[i];
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = weights.weights[i];
        w.assigned_reward = zero_reward ? 0.0 : context.oracle_mdp->reward(t.state, t.action);
        w.labeled = false;
        merged.push_back(w);
    }
    return finalize_effective(labeled.num_states(), labeled.num_actions(), std::move(merged));
}

EffectiveDataset apply_optimal_reweight(const Dataset& labeled, const Dataset& unlabeled,
                                        const StrategyContext& context) {
    require(context.policy_occupancy != nullptr,
            "optimal_reweight needs the policy occupancy in the context");
    require(context.discount > 0.0 && context.discount < 1.0,
            "optimal_reweight needs the discount in the context");
    const int num_states = labeled.num_states();
    const int num_actions = labeled.num_actions();
    OccupancyMeasure d_pi;
    d_pi.density = *context.policy_occupancy;
    OccupancyMeasure d_labeled;
    d_labeled.density =
        labeled.counts_sa.cast<double>() / std::max(1, labeled.size());

    // Same constants as reweight_constants (bounds module).
    const double labeled_size = labeled.size();
    const double effective_size = labeled.size() + unlabeled.size();
    const double c2 = labeled_size / ((1.0 - context.discount) * effective_size);
    const double c1 = context.discount * context.c_p /
                      ((1.0 - context.discount) * (1.0 - context.discount) *
                       std::sqrt(effective_size));
    const ReweightResult target = optimal_reweight(d_pi, d_labeled, c1, c2);

    // Realize the target distribution with per-pair importance weights on the
    // zero-reward shared transitions, scaled so the largest weight is 1.
    const Matrix unlabeled_counts = unlabeled.counts_sa.cast<double>();
    Matrix ratio = Matrix::Zero(num_states, num_actions);
    double max_ratio = 0.0;
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            if (unlabeled_counts(s, a) > 0.0 && target.p(s, a) > 0.0) {
                ratio(s, a) = target.p(s, a) / (unlabeled_counts(s, a) / unlabeled.size());
                max_ratio = std::max(max_ratio, ratio(s, a));
            }
        }
    }
    if (max_ratio > 0.0) ratio /= max_ratio;

    std::vector<WeightedTransition> merged = weight_labeled(labeled);
    for (const Transition& t : unlabeled.transitions) {
        WeightedTransition w;
        w.state = t.state;
        w.action = t.action;
        w.next_state = t.next_state;
        w.weight = ratio(t.state, t.action);
        w.assigned_reward = 0.0;
        w.labeled = false;
        merged.push_back(w);
    }
    return finalize_effective(num_states, num_actions, std::move(merged));
}

} // namespace

EffectiveDataset apply_strategy(const StrategySpec& spec, const Dataset& labeled,
                                const Dataset& unlabeled, const StrategyContext& context) {
    spec.validate();
    switch (spec.kind) {
    case StrategyKind::no_sharing:
        return finalize_effective(labeled.num_states(), labeled.num_actions(),
                                  weight_labeled(labeled));
    case StrategyKind::sharing_all:
        require(context.oracle_mdp != nullptr, "sharing_all needs the oracle MDP in the context");
        return apply_sharing_all(labeled, unlabeled, *context.oracle_mdp);
    case StrategyKind::uds:
        return apply_uds(labeled, unlabeled);
    case StrategyKind::reward_predictor:
        return apply_reward_predictor(labeled, unlabeled,
                                      fit_reward_predictor(labeled, spec.predictor_smoothing));
    case StrategyKind::cds_filter:
        return apply_cds(spec, labeled, unlabeled, context, CdsMode::hard, false);
    case StrategyKind::cds_soft:
        return apply_cds(spec, labeled, unlabeled, context, CdsMode::soft, false);
    case StrategyKind::cds_uds:
        // Zero-reward sharing composed with the hard percentile filter, so
        // rejected transitions drop out of the effective dataset entirely.
        return apply_cds(spec, labeled, unlabeled, context, CdsMode::hard, true);
    case StrategyKind::optimal_reweight:
        return apply_optimal_reweight(labeled, unlabeled, context);
    }
    throw std::invalid_argument("unknown strategy kind");
}

ReweightResult optimal_reweight(const OccupancyMeasure& d_pi, const OccupancyMeasure& d_L,
                                double c1, double c2) {
    require(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0,
            "constants must be nonnegative and not both zero");
    require(d_pi.density.rows() == d_L.density.rows() &&
                d_pi.density.cols() == d_L.density.cols(),
            "occupancy shapes mismatch");
    const int rows = static_cast<int>(d_pi.density.rows());
    const int cols = static_cast<int>(d_pi.density.cols());
    const int n = rows * cols;
    const Eigen::Map<const Vector> d(d_pi.density.data(), n);
    const Eigen::Map<const Vector> dl(d_L.density.data(), n);
    require(std::abs(d.sum() - 1.0) <= 1e-6, "d_pi must sum to 1");

    std::vector<bool> support(n, false);
    for (int i = 0; i < n; ++i) support[i] = d(i) > 0.0;

    auto objective = [&](const Vector& p) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!support[i]) continue;
            if (p(i) <= 0.0) return std::numeric_limits<double>::infinity();
            total += c1 * d(i) / std::sqrt(p(i)) + c2 * dl(i) * d(i) / p(i);
        }
        return total;
    };
    auto gradient = [&](const Vector& p) {
        Vector g = Vector::Zero(n);
        for (int i = 0; i < n; ++i) {
            if (!support[i]) continue;
            g(i) = -0.5 * c1 * d(i) / (p(i) * std::sqrt(p(i))) -
                   c2 * dl(i) * d(i) / (p(i) * p(i));
        }
        return g;
    };

    SimplexMinimizeOptions options;
    options.method = SimplexMethod::mirror;
    options.restarts = 10;
    options.kkt_tol = 1e-10;
    options.max_iters = 200000;
    options.throw_on_max_iters = true;
    const SimplexMinimizeResult solution =
        minimize_on_simplex(objective, gradient, support, options);

    ReweightResult result;
    result.p = Eigen::Map<const Matrix>(solution.x.data(), rows, cols);
    result.objective = solution.value;
    result.kkt_residual = solution.kkt_residual;
    result.iterations = solution.iterations;
    return result;
}

Matrix closed_form_bias_minimizer(const OccupancyMeasure& d_pi, const OccupancyMeasure& d_L) {
    require(d_pi.density.rows() == d_L.density.rows() &&
                d_pi.density.cols() == d_L.density.cols(),
            "occupancy shapes mismatch");
    Matrix p = (d_L.density.array() * d_pi.density.array()).sqrt().matrix();
    const double total = p.sum();
    require(total > 0.0, "supports are disjoint: sqrt(dL * d) is identically zero");
    return p / total;
}

} // namespace udslab
