#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpg/common.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// Finite-horizon tabular MDP with time-inhomogeneous kernels p_h(s'|s,a) and
/// rewards r_h(s,a) in [0,1]. Steps are 0-based internally: h = 0 .. H-1.
///
/// Construction validates every probability row (sum 1 within 1e-12, nonnegative)
/// and throws ConfigError instead of renormalizing.
class MdpSpec {
public:
    /// transition is laid out [h][s][a][s'] and reward [h][s][a], both flat.
    /// A single layer (size S*A*S resp. S*A) is replicated across all H steps.
    MdpSpec(int n_states, int n_actions, int horizon, std::vector<double> transition,
            std::vector<double> reward, Vector initial_dist);

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int horizon() const { return horizon_; }

    double p(int h, int s, int a, int s_next) const {
        return transition_[row_offset(h, s, a) + s_next];
    }
    /// Pointer to the n_states entries of p_h(.|s,a).
    const double* p_row(int h, int s, int a) const {
        return transition_.data() + row_offset(h, s, a);
    }
    double r(int h, int s, int a) const {
        return reward_[(static_cast<std::size_t>(h) * n_states_ + s) * n_actions_ + a];
    }
    const Vector& initial_dist() const { return initial_; }

    const std::vector<double>& transition_data() const { return transition_; }
    const std::vector<double>& reward_data() const { return reward_; }

    /// Same dynamics, rewards multiplied by `scale` per layer h (scale[h]).
    MdpSpec with_reward_scale(const std::vector<double>& scale) const;

    std::string to_json() const;
    static MdpSpec from_json(const std::string& text);
    std::uint64_t hash() const;

private:
    std::size_t row_offset(int h, int s, int a) const {
        return ((static_cast<std::size_t>(h) * n_states_ + s) * n_actions_ + a) * n_states_;
    }

    int n_states_;
    int n_actions_;
    int horizon_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    Vector initial_;
};

/// mu[h](s, a): probability of visiting (s, a) at step h.
struct OccupancyMeasure {
    std::vector<Matrix> mu;  // H layers, n_states x n_actions
};

struct ExactEvaluation {
    std::vector<Matrix> q;       // H layers, n_states x n_actions
    double v = 0.0;
    std::vector<Matrix> grad_q;  // H layers, (n_states * n_actions) x m; empty without a score
    Vector grad_v;
};

/// Backward DP for Q_h and v. Only action probabilities are used.
ExactEvaluation exact_q_and_value(const MdpSpec& mdp, const ActionDistribution& policy);

/// Q, v, and the gradients from the policy-gradient Bellman recursion.
ExactEvaluation exact_evaluation(const MdpSpec& mdp, const Policy& policy);

Vector exact_policy_gradient(const MdpSpec& mdp, const Policy& policy);

OccupancyMeasure occupancy(const MdpSpec& mdp, const ActionDistribution& policy);

struct OptimalSolution {
    std::vector<Matrix> q;                  // optimal Q*_h
    std::vector<std::vector<int>> actions;  // greedy action per (h, s), lowest index on ties
    double value = 0.0;
};

OptimalSolution optimal_solution(const MdpSpec& mdp);
double optimal_value(const MdpSpec& mdp);

/// Throws ConfigError when the policy's state/action counts differ from the MDP's.
void check_dims(const MdpSpec& mdp, const ActionDistribution& policy);

}  // namespace fpg
