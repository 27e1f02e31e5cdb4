#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

struct EnvConfig {
    std::string kind = "frozenlake_like";  // frozenlake_like | gridworld | cliffwalk_like | random_mdp | file
    int rows = 4;             // gridworld only
    int cols = 4;
    double slip = 1.0 / 3.0;  // lateral slip per side (frozenlake) or random-action prob (cliffwalk)
    int horizon = 20;
    std::uint64_t seed = 0;   // random_mdp only
    int n_states = 5;         // random_mdp only
    int n_actions = 3;        // random_mdp only
    std::string path;         // file only

    /// Throws ConfigError on out-of-range probabilities, H < 1, or unknown kind.
    void validate() const;
};

/// Grid conventions: state = row * cols + col, actions 0=left 1=down 2=right 3=up.
/// Moves into a wall leave the agent in place.
///
/// Map cells: S start, F free, H hole, G goal. The intended direction is taken
/// with probability 1 - 2 slip and each perpendicular direction with
/// probability slip. r(s, a) is the probability of entering a goal cell; holes
/// and goals absorb with zero reward.
MdpSpec gridworld(const std::vector<std::string>& map, double slip, int horizon);

/// rows x cols grid without holes, start top-left and goal bottom-right.
MdpSpec open_gridworld(int rows, int cols, double slip, int horizon);

/// The 4x4 lake SFFF/FHFH/FFFH/HFFG. slip = 0 gives the deterministic gridworld.
MdpSpec frozenlake_like(double slip = 1.0 / 3.0, int horizon = 20);

/// 4 x 12 cliff. With probability `random_action` the action is replaced by a
/// uniformly random one. Step reward -1 and cliff reward -100 are shaped by
/// (R + 100) / 100; falling off the cliff returns the agent to the start. The
/// goal absorbs with reward 1 per step.
MdpSpec cliffwalk_like(double random_action = 0.1, int horizon = 30);

/// Dense random MDP: uniform(0,1) weights normalized per row, rewards uniform
/// in [0,1], random initial distribution. Stationary across steps.
MdpSpec random_mdp(int n_states, int n_actions, int horizon, std::uint64_t seed);

MdpSpec make_env(const EnvConfig& config);

/// Tabular softmax with logits beta * Q*_1(s, a).
std::unique_ptr<SoftmaxTabularPolicy> softmax_of_optimal(const MdpSpec& mdp, double beta = 5.0);

}  // namespace fpg
