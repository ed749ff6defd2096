#include "udslab/families.hpp"

#include <cmath>
#include <stdexcept>

namespace udslab {

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

} // namespace

TabularMdp make_gridworld(const GridworldParams& params) {
    require(params.rows >= 1 && params.cols >= 1, "grid must be non-empty");
    require(params.slip >= 0.0 && params.slip <= 1.0, "slip must lie in [0, 1]");
    const int num_states = params.rows * params.cols;
    const int goal = params.goal < 0 ? num_states - 1 : params.goal;
    require(params.start >= 0 && params.start < num_states && goal >= 0 && goal < num_states,
            "start/goal out of range");

    TabularMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = 4;
    mdp.discount = params.discount;
    mdp.reward = Matrix::Zero(num_states, 4);
    mdp.initial_dist = Vector::Zero(num_states);
    mdp.initial_dist(params.start) = 1.0;
    mdp.transition.assign(4, Matrix::Zero(num_states, num_states));

    const int drow[4] = {-1, 0, 1, 0}; // up, right, down, left
    const int dcol[4] = {0, 1, 0, -1};
    auto step = [&](int s, int dir) {
        const int r = s / params.cols + drow[dir];
        const int c = s % params.cols + dcol[dir];
        if (r < 0 || r >= params.rows || c < 0 || c >= params.cols) return s;
        return r * params.cols + c;
    };

    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < 4; ++a) {
            if (s == goal && a == 0) {
                // Docking: staying at the goal is the only rewarded move.
                mdp.transition[a](s, s) = 1.0;
                mdp.reward(s, a) = 1.0;
                continue;
            }
            mdp.transition[a](s, step(s, a)) += 1.0 - params.slip;
            mdp.transition[a](s, step(s, (a + 1) % 4)) += params.slip / 2.0;
            mdp.transition[a](s, step(s, (a + 3) % 4)) += params.slip / 2.0;
        }
    }
    mdp.validate();
    return mdp;
}

TabularMdp make_random_dense(int num_states, int num_actions, double discount,
                             std::uint64_t seed) {
    require(num_states >= 1 && num_actions >= 1, "state/action counts must be positive");
    Rng rng(seed);
    TabularMdp mdp;
    mdp.num_states = num_states;
    mdp.num_actions = num_actions;
    mdp.discount = discount;
    mdp.reward = Matrix::Zero(num_states, num_actions);
    mdp.initial_dist = Vector::Constant(num_states, 1.0 / num_states);
    mdp.transition.assign(num_actions, Matrix::Zero(num_states, num_states));
    for (int s = 0; s < num_states; ++s) {
        for (int a = 0; a < num_actions; ++a) {
            mdp.transition[a].row(s) = rng.dirichlet(num_states).transpose();
            mdp.reward(s, a) = rng.uniform01();
        }
    }
    mdp.validate();
    return mdp;
}

TabularMdp make_chain(const ChainParams& params) {
    require(params.num_states >= 2, "chain needs at least two states");
    require(params.slip >= 0.0 && params.slip <= 1.0, "slip must lie in [0, 1]");
    const int n = params.num_states;
    TabularMdp mdp;
    mdp.num_states = n;
    mdp.num_actions = 2;
    mdp.discount = params.discount;
    mdp.reward = Matrix::Zero(n, 2);
    mdp.reward(n - 1, 0) = 1.0;
    mdp.initial_dist = Vector::Constant(n, 1.0 / n);
    mdp.transition.assign(2, Matrix::Zero(n, n));
    for (int s = 0; s < n; ++s) {
        const int right = std::min(s + 1, n - 1);
        const int left = std::max(s - 1, 0);
        mdp.transition[0](s, right) += 1.0 - params.slip;
        mdp.transition[0](s, s) += params.slip;
        mdp.transition[1](s, left) += 1.0 - params.slip;
        mdp.transition[1](s, s) += params.slip;
    }
    mdp.validate();
    return mdp;
}

TabularMdp make_family(const std::string& family, int size, double discount,
                       std::uint64_t seed) {
    if (family == "gridworld") {
        GridworldParams params;
        // Near-square layout for the requested cell count.
        params.rows = static_cast<int>(std::floor(std::sqrt(static_cast<double>(size))));
        params.rows = std::max(1, params.rows);
        params.cols = (size + params.rows - 1) / params.rows;
        params.discount = discount;
        return make_gridworld(params);
    }
    if (family == "random_dense") {
        return make_random_dense(size, 3, discount, seed);
    }
    if (family == "chain") {
        ChainParams params;
        params.num_states = size;
        params.discount = discount;
        return make_chain(params);
    }
    throw std::invalid_argument("unknown MDP family: " + family);
}

} // namespace udslab
