#pragma once

#include "udslab/mdp.hpp"
#include "udslab/types.hpp"

#include <string>

namespace udslab {

/// Slippery grid navigation. Four actions (up, right, down, left); the
/// intended move succeeds with probability 1 - slip, otherwise one of the two
/// perpendicular moves happens. Bumping a wall stays put. At the goal cell,
/// action 0 docks: the agent stays put and collects reward 1; every other
/// reward is 0.
struct GridworldParams {
    int rows = 3;
    int cols = 4;
    double slip = 0.2;
    double discount = 0.95;
    int start = 0;
    int goal = -1; // defaults to the last cell
};

TabularMdp make_gridworld(const GridworldParams& params);

/// Dense random MDP: Dirichlet transition rows, uniform [0, 1] rewards,
/// uniform initial distribution. Deterministic in the seed.
TabularMdp make_random_dense(int num_states, int num_actions, double discount,
                             std::uint64_t seed);

/// Noisy chain: action 0 steps right and action 1 steps left, each succeeding
/// with probability 1 - slip and staying put otherwise. Only the last state
/// pays reward (1 for stepping right there). Initial distribution uniform.
struct ChainParams {
    int num_states = 4;
    double slip = 0.3;
    double discount = 0.95;
};

TabularMdp make_chain(const ChainParams& params);

/// Dispatch by family name ("gridworld", "random_dense", "chain"); `size` is
/// the cell/state count and extra geometry comes from the defaults above.
TabularMdp make_family(const std::string& family, int size, double discount, std::uint64_t seed);

} // namespace udslab
