#include "udslab/bounds.hpp"
#include "udslab/data.hpp"
#include "udslab/families.hpp"
#include "udslab/mdp.hpp"

#include <doctest.h>

#include <cmath>

using namespace udslab;

namespace {

TabularMdp single_state_mdp(double reward, double discount) {
    TabularMdp mdp;
    mdp.num_states = 1;
    mdp.num_actions = 1;
    mdp.transition = {Matrix::Ones(1, 1)};
    mdp.reward = Matrix::Constant(1, 1, reward);
    mdp.discount = discount;
    mdp.initial_dist = Vector::Ones(1);
    return mdp;
}

TabularPolicy random_policy(int num_states, int num_actions, Rng& rng) {
    TabularPolicy policy;
    policy.probs = Matrix::Zero(num_states, num_actions);
    for (int s = 0; s < num_states; ++s) {
        policy.probs.row(s) = rng.dirichlet(num_actions).transpose();
    }
    return policy;
}

} // namespace

TEST_SUITE("mdp") {

TEST_CASE("return of a single-state loop is the geometric series") {
    const TabularMdp mdp = single_state_mdp(1.0, 0.5);
    const TabularPolicy policy = TabularPolicy::uniform(1, 1);
    CHECK(evaluate_return(mdp, policy) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("zero reward means zero return") {
    const TabularMdp mdp = make_random_dense(5, 3, 0.9, 7);
    TabularMdp zeroed = mdp;
    zeroed.reward.setZero();
    const TabularPolicy policy = TabularPolicy::uniform(5, 3);
    CHECK(evaluate_return(zeroed, policy) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("return matches a Monte-Carlo rollout estimate") {
    ChainParams params;
    params.num_states = 4;
    params.slip = 0.3;
    params.discount = 0.9;
    const TabularMdp mdp = make_chain(params);
    const TabularPolicy policy = TabularPolicy::uniform(4, 2);
    const double exact = evaluate_return(mdp, policy);

    // Independent oracle: truncated discounted rollouts.
    Rng rng(123);
    const int episodes = 20000;
    const int horizon = 330; // gamma^330 ~ 8e-16
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int e = 0; e < episodes; ++e) {
        int s = rng.categorical(mdp.initial_dist);
        double g = 0.0;
        double scale = 1.0;
        for (int t = 0; t < horizon; ++t) {
            const int a = rng.categorical(policy.probs.row(s).transpose());
            g += scale * mdp.reward(s, a);
            scale *= mdp.discount;
            s = rng.categorical(mdp.transition[a].row(s).transpose());
        }
        sum += g;
        sum_sq += g * g;
    }
    const double mean = sum / episodes;
    const double stderr_ = std::sqrt((sum_sq / episodes - mean * mean) / episodes);
    CHECK(std::abs(exact - mean) <= 3.0 * stderr_);
}

TEST_CASE("occupancy of the single pair is one") {
    const TabularMdp mdp = single_state_mdp(0.3, 0.7);
    const OccupancyMeasure d = occupancy(mdp, TabularPolicy::uniform(1, 1));
    CHECK(d.density(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("occupancy concentrates on an absorbing state") {
    TabularMdp mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.transition.assign(2, Matrix::Zero(2, 2));
    mdp.transition[0] << 1, 0, 1, 0; // action 0 goes to (stays at) state 0
    mdp.transition[1] << 0, 1, 0, 1;
    mdp.reward = Matrix::Zero(2, 2);
    mdp.discount = 0.85;
    mdp.initial_dist = Vector::Zero(2);
    mdp.initial_dist(0) = 1.0;
    TabularPolicy stay;
    stay.probs = Matrix::Zero(2, 2);
    stay.probs(0, 0) = 1.0;
    stay.probs(1, 0) = 1.0;
    const OccupancyMeasure d = occupancy(mdp, stay);
    CHECK(d.density(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.density.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("occupancy matches discounted visitation frequencies from rollouts") {
    const TabularMdp mdp = make_random_dense(5, 3, 0.9, 11);
    Rng policy_rng(5);
    const TabularPolicy policy = random_policy(5, 3, policy_rng);
    const Matrix exact = occupancy(mdp, policy).density;

    // Rollout oracle: restart with probability 1 - gamma, count visits.
    Rng rng(999);
    Matrix counts = Matrix::Zero(5, 3);
    const int steps = 1000000;
    int s = rng.categorical(mdp.initial_dist);
    for (int t = 0; t < steps; ++t) {
        const int a = rng.categorical(policy.probs.row(s).transpose());
        counts(s, a) += 1.0;
        const int s2 = rng.categorical(mdp.transition[a].row(s).transpose());
        s = rng.uniform01() < 1.0 - mdp.discount ? rng.categorical(mdp.initial_dist) : s2;
    }
    const double l1 = (counts / steps - exact).cwiseAbs().sum();
    CHECK(l1 <= 1e-2);
}

TEST_CASE("return equals occupancy-weighted reward over the horizon") {
    for (int seed = 0; seed < 20; ++seed) {
        const TabularMdp mdp = make_random_dense(6, 3, 0.93, 100 + seed);
        Rng rng(seed);
        const TabularPolicy policy = random_policy(6, 3, rng);
        const double j = evaluate_return(mdp, policy);
        const Matrix d = occupancy(mdp, policy).density;
        const double via_occupancy =
            (d.array() * mdp.reward.array()).sum() / (1.0 - mdp.discount);
        CHECK(j == doctest::Approx(via_occupancy).epsilon(1e-8));
    }
}

TEST_CASE("occupancy satisfies the flow equations") {
    for (int seed = 0; seed < 10; ++seed) {
        const TabularMdp mdp = make_random_dense(7, 2, 0.9, 300 + seed);
        Rng rng(40 + seed);
        const TabularPolicy policy = random_policy(7, 2, rng);
        const Matrix d = occupancy(mdp, policy).density;
        CHECK(std::abs(d.sum() - 1.0) <= 1e-9);
        CHECK(d.minCoeff() >= -1e-15);
        for (int s2 = 0; s2 < 7; ++s2) {
            double inflow = (1.0 - mdp.discount) * mdp.initial_dist(s2);
            for (int s = 0; s < 7; ++s) {
                for (int a = 0; a < 2; ++a) {
                    inflow += mdp.discount * d(s, a) * mdp.transition[a](s, s2);
                }
            }
            CHECK(std::abs(d.row(s2).sum() - inflow) <= 1e-8);
        }
    }
}

TEST_CASE("empirical model from a single transition") {
    std::vector<Transition> transitions;
    Transition t;
    t.state = 0;
    t.action = 0;
    t.next_state = 1;
    t.reward = 1.0;
    transitions.push_back(t);
    const Dataset dataset = Dataset::from_transitions(2, 1, transitions);
    const EmpiricalMdpResult result =
        empirical_mdp(dataset, 2, 1, 0.9, Vector::Constant(2, 0.5), CoverageMode::lenient);
    CHECK(result.mdp.transition[0](0, 1) == 1.0);
    CHECK(result.mdp.reward(0, 0) == 1.0);
    CHECK(result.uncovered.size() == 1); // state 1 has no data
}

TEST_CASE("exhaustive data from a deterministic MDP reproduces it exactly") {
    GridworldParams params;
    params.rows = 3;
    params.cols = 3;
    params.slip = 0.0;
    const TabularMdp mdp = make_gridworld(params);
    const Dataset dataset = exhaustive_dataset(mdp);
    const EmpiricalMdpResult result = empirical_mdp(dataset, mdp.num_states, mdp.num_actions,
                                                    mdp.discount, mdp.initial_dist);
    CHECK(result.uncovered.empty());
    CHECK((result.mdp.reward - mdp.reward).cwiseAbs().maxCoeff() == 0.0);
    for (int a = 0; a < mdp.num_actions; ++a) {
        CHECK((result.mdp.transition[a] - mdp.transition[a]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("empirical transitions concentrate at the Hoeffding rate") {
    const TabularMdp mdp = make_random_dense(4, 2, 0.9, 17);
    const TabularPolicy uniform = TabularPolicy::uniform(4, 2);
    const Dataset dataset = sample_dataset(mdp, uniform, 100000, 2024);
    const EmpiricalMdpResult fit = empirical_mdp(dataset, 4, 2, 0.9, mdp.initial_dist);
    const double c_p = concentration_constants(dataset.counts_sa, 0.05).c_p;
    for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 2; ++a) {
            const double deviation =
                (fit.mdp.transition[a].row(s) - mdp.transition[a].row(s)).cwiseAbs().sum();
            CHECK(deviation <= c_p / std::sqrt(dataset.counts_sa(s, a)));
        }
    }
}

TEST_CASE("strict coverage mode lists the missing pairs") {
    std::vector<Transition> transitions;
    Transition t;
    t.state = 0;
    t.action = 0;
    t.next_state = 0;
    t.reward = 0.0;
    transitions.push_back(t);
    const Dataset dataset = Dataset::from_transitions(2, 2, transitions);
    CHECK_THROWS_AS(empirical_mdp(dataset, 2, 2, 0.9, Vector::Constant(2, 0.5)), CoverageError);
    try {
        empirical_mdp(dataset, 2, 2, 0.9, Vector::Constant(2, 0.5));
    } catch (const CoverageError& e) {
        CHECK(e.missing_pairs.size() == 3);
        CHECK(e.missing_pairs.front() == std::pair<int, int>{0, 1});
    }
}

TEST_CASE("divergence trivia and the direct-sum oracle") {
    Vector uniform4 = Vector::Constant(4, 0.25);
    CHECK(d_cql(uniform4, uniform4) == doctest::Approx(0.0).epsilon(1e-15));

    Vector p(2), q(2);
    p << 1.0, 0.0;
    q << 0.5, 0.5;
    CHECK(d_cql(p, q) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const Vector a = rng.dirichlet(6);
        const Vector b = rng.dirichlet(6);
        double direct = 0.0;
        for (int i = 0; i < 6; ++i) direct += a(i) * (a(i) / b(i) - 1.0);
        CHECK(d_cql(a, b) == doctest::Approx(direct).epsilon(1e-12));
        CHECK(d_cql(a, b) >= -1e-15);
    }
}

TEST_CASE("divergence is zero only for identical distributions") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector p = rng.dirichlet(5);
        CHECK(d_cql(p, p) == doctest::Approx(0.0).epsilon(1e-14));
        Vector q = rng.dirichlet(5);
        if ((p - q).cwiseAbs().maxCoeff() > 1e-9) CHECK(d_cql(p, q) > 0.0);
    }
}

TEST_CASE("divergence names the index of a support violation") {
    Vector p(3), q(3);
    p << 0.2, 0.8, 0.0;
    q << 1.0, 0.0, 0.0;
    CHECK_THROWS_AS(d_cql(p, q), SupportError);
    try {
        d_cql(p, q);
    } catch (const SupportError& e) {
        CHECK(e.index == 1);
    }
}

TEST_CASE("JSON round-trip preserves the model bit-exactly") {
    const TabularMdp mdp = make_random_dense(5, 3, 0.92, 55);
    const TabularMdp back = mdp_from_json(mdp_to_json(mdp));
    CHECK(back.num_states == mdp.num_states);
    CHECK(back.num_actions == mdp.num_actions);
    CHECK(back.discount == mdp.discount);
    CHECK((back.reward - mdp.reward).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.initial_dist - mdp.initial_dist).cwiseAbs().maxCoeff() == 0.0);
    for (int a = 0; a < 3; ++a) {
        CHECK((back.transition[a] - mdp.transition[a]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("greedy tie-break picks the lowest action index") {
    Matrix q(1, 3);
    q << 2.0, 2.0, 1.0;
    const TabularPolicy policy = greedy_policy(q);
    CHECK(policy.probs(0, 0) == 1.0);
    CHECK(policy.probs(0, 1) == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
    const TabularMdp mdp = make_random_dense(4, 2, 0.9, 3);
    const TabularPolicy wrong = TabularPolicy::uniform(5, 2);
    CHECK_THROWS_AS(evaluate_return(mdp, wrong), std::invalid_argument);
    CHECK_THROWS_AS(occupancy(mdp, wrong), std::invalid_argument);
}

} // TEST_SUITE
