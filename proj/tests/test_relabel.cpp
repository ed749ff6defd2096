#include "udslab/bounds.hpp"
#include "udslab/families.hpp"
#include "udslab/relabel.hpp"
#include "udslab/simplex.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace udslab;

namespace {

Dataset one_pair_dataset(int count, double reward, bool labeled) {
    std::vector<Transition> transitions;
    for (int i = 0; i < count; ++i) {
        Transition t;
        t.state = 0;
        t.action = 0;
        t.next_state = 1;
        if (labeled) t.reward = reward;
        transitions.push_back(t);
    }
    return Dataset::from_transitions(2, 2, std::move(transitions));
}

struct SampledPair {
    TabularMdp mdp;
    Dataset labeled;
    Dataset unlabeled;
};

SampledPair sample_pair(Quality labeled_quality, Quality unlabeled_quality, int labeled_size,
                        int unlabeled_size, std::uint64_t seed) {
    SampledPair out{make_random_dense(4, 2, 0.9, seed), {}, {}};
    const TabularPolicy lp = behavior_policy(out.mdp, {labeled_quality, 0.5, 1.0});
    const TabularPolicy up = behavior_policy(out.mdp, {unlabeled_quality, 0.5, 1.0});
    out.labeled = sample_dataset(out.mdp, lp, labeled_size, seed * 2 + 1);
    SampleOptions options;
    options.labeled = false;
    out.unlabeled = sample_dataset(out.mdp, up, unlabeled_size, seed * 2 + 2, options);
    return out;
}

// Independent recount of the derived tables from the weighted transitions.
void check_effective_consistency(const EffectiveDataset& eff) {
    const int ns = eff.num_states();
    const int na = eff.num_actions();
    Matrix weight = Matrix::Zero(ns, na);
    Matrix labeled_weight = Matrix::Zero(ns, na);
    Matrix reward_weight = Matrix::Zero(ns, na);
    for (const WeightedTransition& t : eff.transitions) {
        weight(t.state, t.action) += t.weight;
        if (t.labeled) labeled_weight(t.state, t.action) += t.weight;
        reward_weight(t.state, t.action) += t.weight * t.assigned_reward;
    }
    for (int s = 0; s < ns; ++s) {
        double row_weight = 0.0;
        for (int a = 0; a < na; ++a) {
            row_weight += weight(s, a);
            if (weight(s, a) > 0.0) {
                CHECK(eff.f_table(s, a) ==
                      doctest::Approx(labeled_weight(s, a) / weight(s, a)).epsilon(1e-12));
                CHECK(eff.r_eff_table(s, a) ==
                      doctest::Approx(reward_weight(s, a) / weight(s, a)).epsilon(1e-12));
            } else {
                CHECK(eff.f_table(s, a) == 1.0);
                CHECK(eff.r_eff_table(s, a) == 0.0);
            }
            CHECK(eff.weighted_counts_sa(s, a) ==
                  doctest::Approx(weight(s, a)).epsilon(1e-12));
        }
        for (int a = 0; a < na; ++a) {
            const double expected =
                row_weight > 0.0 ? weight(s, a) / row_weight : 1.0 / na;
            CHECK(eff.behavior.probs(s, a) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
    eff.behavior.validate();
}

} // namespace

TEST_SUITE("relabel") {

TEST_CASE("zero-reward sharing with no unlabeled data degenerates to the labeled set") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 300, 1, 7);
    const Dataset empty = Dataset::from_transitions(4, 2, {});
    const EffectiveDataset eff = apply_uds(inst.labeled, empty);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            if (eff.weighted_counts_sa(s, a) > 0.0) CHECK(eff.f_table(s, a) == 1.0);
        }
    }
    CHECK(eff.transitions.size() == inst.labeled.transitions.size());
    check_effective_consistency(eff);
}

TEST_CASE("the labeled fraction and effective reward mix as counts") {
    const Dataset labeled = one_pair_dataset(3, 1.0, true);
    const Dataset unlabeled = one_pair_dataset(1, 0.0, false);
    const EffectiveDataset eff = apply_uds(labeled, unlabeled);
    CHECK(eff.f_table(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(eff.r_eff_table(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(eff.counts_eff(0, 0) == 4);
}

TEST_CASE("rewards in the unlabeled input are a contract violation") {
    const Dataset labeled = one_pair_dataset(2, 1.0, true);
    const Dataset bogus = one_pair_dataset(1, 0.5, true);
    CHECK_THROWS_AS(apply_uds(labeled, bogus), std::invalid_argument);
}

TEST_CASE("identically distributed halves give a labeled fraction near one half") {
    const TabularMdp mdp = make_random_dense(3, 2, 0.9, 70);
    const TabularPolicy policy = behavior_policy(mdp, {Quality::medium, 0.5, 1.0});
    const Dataset labeled = sample_dataset(mdp, policy, 10000, 1);
    SampleOptions options;
    options.labeled = false;
    const Dataset unlabeled = sample_dataset(mdp, policy, 10000, 2, options);
    const EffectiveDataset eff = apply_uds(labeled, unlabeled);
    double worst = 0.0;
    for (int s = 0; s < 3; ++s) {
        for (int a = 0; a < 2; ++a) {
            worst = std::max(worst, std::abs(eff.f_table(s, a) - 0.5));
        }
    }
    CHECK(worst <= 0.1);
}

TEST_CASE("oracle sharing labels with the true reward") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 500, 2000, 8);
    const EffectiveDataset eff = apply_sharing_all(inst.labeled, inst.unlabeled, inst.mdp);
    for (const WeightedTransition& t : eff.transitions) {
        if (!t.labeled) CHECK(t.assigned_reward == inst.mdp.reward(t.state, t.action));
    }
    // Deterministic labels: the effective reward equals the truth at covered pairs.
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            if (eff.weighted_counts_sa(s, a) > 0.0) {
                CHECK(eff.r_eff_table(s, a) ==
                      doctest::Approx(inst.mdp.reward(s, a)).epsilon(1e-12));
            }
        }
    }
    check_effective_consistency(eff);
}

TEST_CASE("oracle sharing with no unlabeled data equals no sharing") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 300, 1, 9);
    const Dataset empty = Dataset::from_transitions(4, 2, {});
    const EffectiveDataset shared = apply_sharing_all(inst.labeled, empty, inst.mdp);
    StrategySpec spec;
    spec.kind = StrategyKind::no_sharing;
    const EffectiveDataset none = apply_strategy(spec, inst.labeled, empty);
    CHECK((shared.f_table - none.f_table).cwiseAbs().maxCoeff() == 0.0);
    CHECK((shared.r_eff_table - none.r_eff_table).cwiseAbs().maxCoeff() == 0.0);
    CHECK((shared.behavior.probs - none.behavior.probs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("oracle sharing and zero-reward sharing agree on counts") {
    const SampledPair inst = sample_pair(Quality::expert, Quality::random, 200, 3000, 10);
    const EffectiveDataset uds = apply_uds(inst.labeled, inst.unlabeled);
    const EffectiveDataset all = apply_sharing_all(inst.labeled, inst.unlabeled, inst.mdp);
    CHECK((uds.f_table - all.f_table).cwiseAbs().maxCoeff() == 0.0);
    CHECK((uds.weighted_counts_sa - all.weighted_counts_sa).cwiseAbs().maxCoeff() == 0.0);
    CHECK((uds.counts_eff - all.counts_eff).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("a fully observed deterministic reward is interpolated exactly") {
    GridworldParams params;
    params.rows = 2;
    params.cols = 3;
    params.slip = 0.0;
    const TabularMdp mdp = make_gridworld(params);
    const Dataset data = exhaustive_dataset(mdp);
    const Matrix predictor = fit_reward_predictor(data, 0.0);
    CHECK((predictor - mdp.reward).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unobserved pairs fall back to the global mean") {
    const Dataset labeled = one_pair_dataset(4, 0.8, true);
    const Matrix predictor = fit_reward_predictor(labeled, 1.0);
    CHECK(predictor(1, 1) == doctest::Approx(0.8).epsilon(1e-12)); // prior
    CHECK(predictor(0, 0) == doctest::Approx(0.8).epsilon(1e-12)); // (4*0.8 + 0.8)/5
    const Dataset empty = Dataset::from_transitions(2, 2, {});
    CHECK_THROWS_AS(fit_reward_predictor(empty, 1.0), std::invalid_argument);
}

TEST_CASE("the predictor matches an independent recomputation") {
    const SampledPair inst = sample_pair(Quality::expert, Quality::random, 150, 100, 11);
    const double smoothing = 2.0;
    const Matrix predictor = fit_reward_predictor(inst.labeled, smoothing);
    Matrix sums = Matrix::Zero(4, 2);
    Matrix counts = Matrix::Zero(4, 2);
    double total = 0.0;
    for (const Transition& t : inst.labeled.transitions) {
        sums(t.state, t.action) += *t.reward;
        counts(t.state, t.action) += 1.0;
        total += *t.reward;
    }
    const double prior = total / inst.labeled.size();
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double expected = std::clamp(
                (sums(s, a) + smoothing * prior) / (counts(s, a) + smoothing), 0.0, 1.0);
            CHECK(predictor(s, a) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("a perfect predictor reproduces oracle sharing") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 400, 2000, 12);
    const EffectiveDataset predicted =
        apply_reward_predictor(inst.labeled, inst.unlabeled, inst.mdp.reward);
    const EffectiveDataset oracle = apply_sharing_all(inst.labeled, inst.unlabeled, inst.mdp);
    CHECK((predicted.r_eff_table - oracle.r_eff_table).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((predicted.f_table - oracle.f_table).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a zero predictor reproduces zero-reward sharing") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 400, 2000, 13);
    const EffectiveDataset predicted =
        apply_reward_predictor(inst.labeled, inst.unlabeled, Matrix::Zero(4, 2));
    const EffectiveDataset uds = apply_uds(inst.labeled, inst.unlabeled);
    CHECK((predicted.r_eff_table - uds.r_eff_table).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((predicted.f_table - uds.f_table).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("predictor reward errors match a direct recomputation per pair") {
    const SampledPair inst = sample_pair(Quality::expert, Quality::random, 120, 80, 14);
    Rng rng(21);
    Matrix predictor(4, 2);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) predictor(s, a) = rng.uniform01();
    }
    const Matrix delta = inst.mdp.reward - predictor;
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double direct = inst.mdp.reward(s, a) - predictor(s, a);
            CHECK(std::signbit(delta(s, a)) == std::signbit(direct));
            CHECK(delta(s, a) == doctest::Approx(direct).epsilon(1e-15));
        }
    }
}

TEST_CASE("a constant Q table keeps every candidate") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 100, 400, 15);
    StrategySpec spec;
    const CdsWeights w = cds_weights(inst.unlabeled, inst.labeled, Matrix::Constant(4, 2, 3.0),
                                     spec, CdsMode::hard);
    CHECK(w.threshold == 3.0);
    for (const double weight : w.weights) CHECK(weight == 1.0); // gap 0 is kept
}

TEST_CASE("candidates below the reference range are all dropped") {
    // Reference lives at state 0 (Q = 5), candidates at state 1 (Q = 1).
    std::vector<Transition> ref_t, cand_t;
    for (int i = 0; i < 10; ++i) {
        Transition r;
        r.state = 0;
        r.action = 0;
        r.next_state = 0;
        r.reward = 1.0;
        ref_t.push_back(r);
        Transition c;
        c.state = 1;
        c.action = 0;
        c.next_state = 0;
        cand_t.push_back(c);
    }
    Matrix q(2, 1);
    q << 5.0, 1.0;
    StrategySpec spec;
    const CdsWeights w = cds_weights(Dataset::from_transitions(2, 1, cand_t),
                                     Dataset::from_transitions(2, 1, ref_t), q, spec,
                                     CdsMode::hard);
    for (const double weight : w.weights) CHECK(weight == 0.0);
}

TEST_CASE("the percentile threshold matches an independent sort") {
    Rng rng(31);
    for (const int n : {5, 6, 101, 200}) {
        std::vector<Transition> ref_t;
        Matrix q(1, n);
        for (int i = 0; i < n; ++i) {
            Transition t;
            t.state = 0;
            t.action = i;
            t.next_state = 0;
            t.reward = 0.0;
            ref_t.push_back(t);
            q(0, i) = rng.uniform(-5.0, 5.0);
        }
        StrategySpec spec;
        spec.k_percentile = 50.0;
        const Dataset reference = Dataset::from_transitions(1, n, ref_t);
        const CdsWeights w =
            cds_weights(reference, reference, q, spec, CdsMode::hard);
        std::vector<double> sorted(q.data(), q.data() + n);
        std::sort(sorted.begin(), sorted.end());
        const double median = n % 2 == 1 ? sorted[n / 2]
                                         : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        CHECK(w.threshold == doctest::Approx(median).epsilon(1e-12));
    }
}

TEST_CASE("the hard filter keeps the expected fraction of in-distribution data") {
    const TabularMdp mdp = make_random_dense(5, 3, 0.9, 90);
    const TabularPolicy policy = behavior_policy(mdp, {Quality::medium, 0.5, 1.0});
    const Dataset reference = sample_dataset(mdp, policy, 4000, 51);
    SampleOptions options;
    options.labeled = false;
    const Dataset candidate = sample_dataset(mdp, policy, 4000, 52, options);
    Rng rng(3);
    Matrix q(5, 3);
    for (int s = 0; s < 5; ++s) {
        for (int a = 0; a < 3; ++a) q(s, a) = rng.uniform01();
    }
    for (const double k : {25.0, 50.0, 75.0}) {
        StrategySpec spec;
        spec.k_percentile = k;
        const CdsWeights w = cds_weights(candidate, reference, q, spec, CdsMode::hard);
        double kept = 0.0;
        for (const double weight : w.weights) kept += weight;
        CHECK(kept / w.weights.size() == doctest::Approx(1.0 - k / 100.0).epsilon(0.08));
    }
}

TEST_CASE("soft weights are sigmoidal and deterministic") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 200, 500, 16);
    StrategySpec spec;
    const Matrix constant_q = Matrix::Constant(4, 2, 1.0);
    const CdsWeights w =
        cds_weights(inst.unlabeled, inst.labeled, constant_q, spec, CdsMode::soft);
    for (const double weight : w.weights) CHECK(weight == doctest::Approx(0.5).epsilon(1e-12));

    Rng rng(4);
    Matrix q(4, 2);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) q(s, a) = rng.uniform(-3.0, 3.0);
    }
    const CdsWeights first = cds_weights(inst.unlabeled, inst.labeled, q, spec, CdsMode::soft);
    const CdsWeights second = cds_weights(inst.unlabeled, inst.labeled, q, spec, CdsMode::soft);
    CHECK(first.weights == second.weights);
    for (const double weight : first.weights) {
        CHECK(weight > 0.0);
        CHECK(weight < 1.0);
    }
}

TEST_CASE("an empty reference set has no percentile") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 100, 100, 17);
    const Dataset empty = Dataset::from_transitions(4, 2, {});
    StrategySpec spec;
    CHECK_THROWS_AS(cds_weights(inst.unlabeled, empty, Matrix::Zero(4, 2), spec, CdsMode::hard),
                    std::invalid_argument);
}

TEST_CASE("no sharing keeps exactly the labeled data") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 250, 800, 18);
    StrategySpec spec;
    spec.kind = StrategyKind::no_sharing;
    const EffectiveDataset eff = apply_strategy(spec, inst.labeled, inst.unlabeled);
    CHECK(static_cast<int>(eff.transitions.size()) == inst.labeled.size());
    CHECK(eff.f_table.minCoeff() == 1.0);
    check_effective_consistency(eff);
}

TEST_CASE("all-pass filtering reproduces plain zero-reward sharing") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 200, 600, 19);
    StrategySpec spec;
    spec.kind = StrategyKind::cds_uds;
    StrategyContext context;
    const Matrix constant_q = Matrix::Constant(4, 2, 2.0); // every gap is zero: keep all
    context.conservative_q = &constant_q;
    const EffectiveDataset filtered = apply_strategy(spec, inst.labeled, inst.unlabeled, context);
    const EffectiveDataset plain = apply_uds(inst.labeled, inst.unlabeled);
    CHECK((filtered.f_table - plain.f_table).cwiseAbs().maxCoeff() == 0.0);
    CHECK((filtered.r_eff_table - plain.r_eff_table).cwiseAbs().maxCoeff() == 0.0);
    CHECK((filtered.behavior.probs - plain.behavior.probs).cwiseAbs().maxCoeff() == 0.0);
    CHECK(filtered.transitions.size() == plain.transitions.size());
}

TEST_CASE("off-distribution junk is excluded by the percentile rule") {
    // Labeled data lives on high-Q pairs of state 0/1; junk unlabeled data
    // sits on state 2 whose Q is far below the reference median.
    std::vector<Transition> lab_t, unl_t;
    for (int i = 0; i < 20; ++i) {
        Transition t;
        t.state = i % 2;
        t.action = 0;
        t.next_state = (i + 1) % 2;
        t.reward = 1.0;
        lab_t.push_back(t);
    }
    for (int i = 0; i < 30; ++i) {
        Transition t;
        t.state = (i % 3 == 0) ? 0 : 2; // a third is fine, the rest is junk
        t.action = 0;
        t.next_state = 2;
        unl_t.push_back(t);
    }
    const Dataset labeled = Dataset::from_transitions(3, 1, lab_t);
    const Dataset unlabeled = Dataset::from_transitions(3, 1, unl_t);
    Matrix q(3, 1);
    q << 4.0, 6.0, -2.0;
    StrategySpec spec;
    spec.kind = StrategyKind::cds_uds;
    StrategyContext context;
    context.conservative_q = &q;
    const EffectiveDataset eff = apply_strategy(spec, labeled, unlabeled, context);

    // Independent threshold: median of the reference Q multiset.
    std::vector<double> ref_q;
    for (const Transition& t : labeled.transitions) ref_q.push_back(q(t.state, t.action));
    std::sort(ref_q.begin(), ref_q.end());
    const double median = 0.5 * (ref_q[ref_q.size() / 2 - 1] + ref_q[ref_q.size() / 2]);
    for (const WeightedTransition& t : eff.transitions) {
        if (t.labeled) continue;
        const bool expected_kept = q(t.state, t.action) >= median;
        CHECK(t.weight == (expected_kept ? 1.0 : 0.0));
    }
    CHECK(eff.weighted_counts_sa(2, 0) == 0.0); // junk pairs carry no weight
    CHECK(eff.counts_eff(2, 0) == 0);
}

TEST_CASE("strategies demand their context ingredients") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 100, 100, 20);
    StrategySpec spec;
    spec.kind = StrategyKind::sharing_all;
    CHECK_THROWS_AS(apply_strategy(spec, inst.labeled, inst.unlabeled), std::invalid_argument);
    spec.kind = StrategyKind::cds_uds;
    CHECK_THROWS_AS(apply_strategy(spec, inst.labeled, inst.unlabeled), std::invalid_argument);
    spec.kind = StrategyKind::optimal_reweight;
    CHECK_THROWS_AS(apply_strategy(spec, inst.labeled, inst.unlabeled), std::invalid_argument);
}

TEST_CASE("zero-reward sharing never understates the true reward") {
    for (int seed = 0; seed < 10; ++seed) {
        const SampledPair inst =
            sample_pair(Quality::medium, Quality::random, 300, 1500, 40 + seed);
        const EffectiveDataset eff = apply_uds(inst.labeled, inst.unlabeled);
        const Matrix delta = ((1.0 - eff.f_table.array()) * inst.mdp.reward.array()).matrix();
        CHECK(delta.minCoeff() >= 0.0);
    }
}

TEST_CASE("soft filtering keeps the derived tables consistent") {
    const SampledPair inst = sample_pair(Quality::expert, Quality::random, 150, 900, 22);
    StrategySpec spec;
    spec.kind = StrategyKind::cds_soft;
    Rng rng(6);
    Matrix q(4, 2);
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) q(s, a) = rng.uniform(-2.0, 2.0);
    }
    StrategyContext context;
    context.conservative_q = &q;
    context.oracle_mdp = &inst.mdp;
    const EffectiveDataset eff = apply_strategy(spec, inst.labeled, inst.unlabeled, context);
    check_effective_consistency(eff);
}

TEST_CASE("effective datasets export the extended CSV schema") {
    const SampledPair inst = sample_pair(Quality::medium, Quality::random, 20, 20, 23);
    const EffectiveDataset eff = apply_uds(inst.labeled, inst.unlabeled);
    const std::string csv = eff.to_csv();
    CHECK(csv.rfind("state,action,next_state,reward,task_id,weight,assigned_reward\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 41); // header + 40 rows
}

TEST_CASE("a symmetric objective is minimized by the uniform distribution") {
    OccupancyMeasure d_pi;
    d_pi.density = Matrix::Constant(4, 1, 0.25);
    OccupancyMeasure d_l;
    d_l.density = Matrix::Constant(4, 1, 0.25);
    const ReweightResult result = optimal_reweight(d_pi, d_l, 1.0, 0.0);
    CHECK((result.p.array() - 0.25).abs().maxCoeff() <= 1e-6);
    CHECK(result.kkt_residual <= 1e-5);
}

TEST_CASE("with matching occupancies the optimum follows the policy marginal") {
    Rng rng(12);
    OccupancyMeasure d_pi;
    d_pi.density = rng.dirichlet(6);
    d_pi.density = (d_pi.density.array() + 0.05).matrix();
    d_pi.density /= d_pi.density.sum();
    OccupancyMeasure d_l;
    d_l.density = d_pi.density;
    // With negligible sqrt-term weight this reduces to the closed form
    // sqrt(dL * d) which collapses to d itself.
    const ReweightResult result = optimal_reweight(d_pi, d_l, 1e-9, 1.0);
    CHECK((result.p - d_pi.density).cwiseAbs().sum() <= 1e-4);
}

TEST_CASE("the reweighting optimizer matches a dense grid search on three points") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        OccupancyMeasure d_pi;
        d_pi.density = (rng.dirichlet(3).array() + 0.05).matrix();
        d_pi.density /= d_pi.density.sum();
        OccupancyMeasure d_l;
        d_l.density = (rng.dirichlet(3).array() + 0.05).matrix();
        d_l.density /= d_l.density.sum();
        const double c1 = rng.uniform(0.2, 3.0);
        const double c2 = rng.uniform(0.2, 3.0);
        const ReweightResult result = optimal_reweight(d_pi, d_l, c1, c2);

        auto objective = [&](double p0, double p1, double p2) {
            if (p0 <= 0 || p1 <= 0 || p2 <= 0) return 1e300;
            double total = 0.0;
            const double p[3] = {p0, p1, p2};
            for (int i = 0; i < 3; ++i) {
                total += c1 * d_pi.density(i) / std::sqrt(p[i]) +
                         c2 * d_l.density(i) * d_pi.density(i) / p[i];
            }
            return total;
        };
        double best = 1e300;
        const int resolution = 200;
        for (int a = 1; a < resolution; ++a) {
            for (int b = 1; b < resolution - a; ++b) {
                best = std::min(best, objective(static_cast<double>(a) / resolution,
                                                static_cast<double>(b) / resolution,
                                                static_cast<double>(resolution - a - b) /
                                                    resolution));
            }
        }
        CHECK(result.objective <= best + 1e-3);
        CHECK(result.objective >= best - 1e-3);
        CHECK(result.kkt_residual <= 1e-5);
        CHECK(std::abs(result.p.sum() - 1.0) <= 1e-9);
    }
}

TEST_CASE("the optimized distribution dominates the natural candidates") {
    Rng rng(44);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 4 + rng.uniform_int(8);
        OccupancyMeasure d_pi, d_l;
        d_pi.density = (rng.dirichlet(n).array() + 0.03).matrix();
        d_pi.density /= d_pi.density.sum();
        d_l.density = (rng.dirichlet(n).array() + 0.03).matrix();
        d_l.density /= d_l.density.sum();
        const double c1 = rng.uniform(0.1, 4.0);
        const double c2 = rng.uniform(0.1, 4.0);
        const ReweightResult result = optimal_reweight(d_pi, d_l, c1, c2);
        auto objective = [&](const Matrix& p) {
            double total = 0.0;
            for (int i = 0; i < n; ++i) {
                total += c1 * d_pi.density(i) / std::sqrt(p(i)) +
                         c2 * d_l.density(i) * d_pi.density(i) / p(i);
            }
            return total;
        };
        CHECK(result.objective <= objective(d_pi.density) + 1e-9);
        CHECK(result.objective <= objective(Matrix::Constant(n, 1, 1.0 / n)) + 1e-9);
    }
}

TEST_CASE("the optimizer respects the support of the policy marginal") {
    OccupancyMeasure d_pi;
    d_pi.density = Matrix::Zero(4, 1);
    d_pi.density(0, 0) = 0.5;
    d_pi.density(2, 0) = 0.5;
    OccupancyMeasure d_l;
    d_l.density = Matrix::Constant(4, 1, 0.25);
    const ReweightResult result = optimal_reweight(d_pi, d_l, 1.0, 1.0);
    CHECK(result.p(1, 0) == 0.0);
    CHECK(result.p(3, 0) == 0.0);
    CHECK(result.p(0, 0) > 0.0);
    CHECK(std::abs(result.p.sum() - 1.0) <= 1e-9);
}

TEST_CASE("closed-form bias minimizer trivia") {
    Rng rng(14);
    OccupancyMeasure d_pi;
    d_pi.density = rng.dirichlet(5);
    OccupancyMeasure d_l;
    d_l.density = d_pi.density;
    const Matrix same = closed_form_bias_minimizer(d_pi, d_l);
    CHECK((same - d_pi.density).cwiseAbs().maxCoeff() <= 1e-12);

    OccupancyMeasure point;
    point.density = Matrix::Zero(5, 1);
    point.density(2, 0) = 1.0;
    OccupancyMeasure uniform;
    uniform.density = Matrix::Constant(5, 1, 0.2);
    const Matrix concentrated = closed_form_bias_minimizer(point, uniform);
    CHECK(concentrated(2, 0) == doctest::Approx(1.0).epsilon(1e-12));

    OccupancyMeasure left, right;
    left.density = Matrix::Zero(2, 1);
    left.density(0, 0) = 1.0;
    right.density = Matrix::Zero(2, 1);
    right.density(1, 0) = 1.0;
    CHECK_THROWS_AS(closed_form_bias_minimizer(left, right), std::invalid_argument);
}

TEST_CASE("numeric minimization of the bias objective lands on the closed form") {
    Rng rng(15);
    const int n = 8;
    Vector d_pi = (rng.dirichlet(n).array() + 0.03).matrix();
    d_pi /= d_pi.sum();
    Vector d_l = (rng.dirichlet(n).array() + 0.03).matrix();
    d_l /= d_l.sum();
    const Matrix counts = 500.0 * Matrix(d_l);
    const Matrix reward = Matrix::Ones(n, 1);
    const Matrix d_pi_m = d_pi;
    const Matrix d_l_m = d_l;

    auto objective = [&](const Vector& p) {
        return reward_bias_objective(p, d_pi_m, d_l_m, counts, reward);
    };
    auto gradient = [&](const Vector& p) {
        Vector g(n);
        for (int i = 0; i < n; ++i) {
            g(i) = 1.0 - counts(i, 0) * d_pi(i) / (counts.sum() * p(i) * p(i));
        }
        return g;
    };
    SimplexMinimizeOptions options;
    options.method = SimplexMethod::projection;
    options.restarts = 3;
    options.kkt_tol = 1e-11;
    const SimplexMinimizeResult numeric =
        minimize_on_simplex(objective, gradient, std::vector<bool>(n, true), options);
    OccupancyMeasure om_pi, om_l;
    om_pi.density = d_pi_m;
    om_l.density = d_l_m;
    const Matrix closed = closed_form_bias_minimizer(om_pi, om_l);
    CHECK((numeric.x - Eigen::Map<const Vector>(closed.data(), n)).cwiseAbs().sum() <= 1e-4);
}

} // TEST_SUITE
