#include "fpg/mdp.hpp"

#include <cmath>

#include <json.hpp>

namespace fpg {
namespace {

constexpr double kProbTol = 1e-12;

void check_distribution(const double* p, int n, const std::string& where) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        if (!(p[i] >= 0.0) || !std::isfinite(p[i])) {
            throw ConfigError(where + ": negative or non-finite probability");
        }
        sum += p[i];
    }
    if (std::abs(sum - 1.0) > kProbTol) {
        throw ConfigError(where + ": probabilities sum to " + std::to_string(sum) + ", not 1");
    }
}

}  // namespace

MdpSpec::MdpSpec(int n_states, int n_actions, int horizon, std::vector<double> transition,
                 std::vector<double> reward, Vector initial_dist)
    : n_states_(n_states), n_actions_(n_actions), horizon_(horizon), initial_(std::move(initial_dist)) {
    if (n_states <= 0 || n_actions <= 0 || horizon <= 0) {
        throw ConfigError("MDP needs positive state count, action count and horizon");
    }
    const std::size_t layer_p = static_cast<std::size_t>(n_states) * n_actions * n_states;
    const std::size_t layer_r = static_cast<std::size_t>(n_states) * n_actions;
    if (transition.size() == layer_p && horizon > 1) {
        transition_.reserve(layer_p * horizon);
        for (int h = 0; h < horizon; ++h) transition_.insert(transition_.end(), transition.begin(), transition.end());
    } else if (transition.size() == layer_p * horizon) {
        transition_ = std::move(transition);
    } else {
        throw ConfigError("transition table has " + std::to_string(transition.size()) + " entries, expected " +
                          std::to_string(layer_p * horizon) + " or one layer of " + std::to_string(layer_p));
    }
    if (reward.size() == layer_r && horizon > 1) {
        reward_.reserve(layer_r * horizon);
        for (int h = 0; h < horizon; ++h) reward_.insert(reward_.end(), reward.begin(), reward.end());
    } else if (reward.size() == layer_r * horizon) {
        reward_ = std::move(reward);
    } else {
        throw ConfigError("reward table has " + std::to_string(reward.size()) + " entries, expected " +
                          std::to_string(layer_r * horizon));
    }
    if (initial_.size() != n_states) throw ConfigError("initial distribution has the wrong length");

    for (int h = 0; h < horizon_; ++h) {
        for (int s = 0; s < n_states_; ++s) {
            for (int a = 0; a < n_actions_; ++a) {
                check_distribution(p_row(h, s, a), n_states_,
                                   "p[" + std::to_string(h) + "][" + std::to_string(s) + "][" + std::to_string(a) + "]");
                const double rew = r(h, s, a);
                if (!(rew >= 0.0 && rew <= 1.0)) {
                    throw ConfigError("reward r[" + std::to_string(h) + "][" + std::to_string(s) + "][" +
                                      std::to_string(a) + "] outside [0, 1]");
                }
            }
        }
    }
    check_distribution(initial_.data(), n_states_, "initial distribution");
}

MdpSpec MdpSpec::with_reward_scale(const std::vector<double>& scale) const {
    if (scale.size() != static_cast<std::size_t>(horizon_)) throw ConfigError("reward scale needs one entry per step");
    std::vector<double> rew = reward_;
    const std::size_t layer = static_cast<std::size_t>(n_states_) * n_actions_;
    for (int h = 0; h < horizon_; ++h) {
        for (std::size_t i = 0; i < layer; ++i) rew[h * layer + i] *= scale[h];
    }
    return MdpSpec(n_states_, n_actions_, horizon_, transition_, std::move(rew), initial_);
}

std::string MdpSpec::to_json() const {
    nlohmann::json doc;
    doc["n_states"] = n_states_;
    doc["n_actions"] = n_actions_;
    doc["horizon"] = horizon_;
    auto& tr = doc["transition"] = nlohmann::json::array();
    auto& rw = doc["reward"] = nlohmann::json::array();
    for (int h = 0; h < horizon_; ++h) {
        nlohmann::json tl = nlohmann::json::array(), rl = nlohmann::json::array();
        for (int s = 0; s < n_states_; ++s) {
            nlohmann::json ts = nlohmann::json::array(), rs = nlohmann::json::array();
            for (int a = 0; a < n_actions_; ++a) {
                ts.push_back(std::vector<double>(p_row(h, s, a), p_row(h, s, a) + n_states_));
                rs.push_back(r(h, s, a));
            }
            tl.push_back(std::move(ts));
            rl.push_back(std::move(rs));
        }
        tr.push_back(std::move(tl));
        rw.push_back(std::move(rl));
    }
    doc["initial_dist"] = std::vector<double>(initial_.data(), initial_.data() + initial_.size());
    return doc.dump();
}

MdpSpec MdpSpec::from_json(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("env file: ") + e.what(), 0);
    }
    try {
        const int S = doc.at("n_states").get<int>();
        const int A = doc.at("n_actions").get<int>();
        const int H = doc.at("horizon").get<int>();
        const auto& tr = doc.at("transition");
        const auto& rw = doc.at("reward");
        std::vector<double> transition, reward;
        for (const auto& layer : tr) {
            if (layer.size() != static_cast<std::size_t>(S)) throw ConfigError("env file: transition layer needs n_states rows");
            for (const auto& row_s : layer) {
                if (row_s.size() != static_cast<std::size_t>(A)) throw ConfigError("env file: transition row needs n_actions entries");
                for (const auto& row_a : row_s) {
                    auto probs = row_a.get<std::vector<double>>();
                    if (probs.size() != static_cast<std::size_t>(S)) throw ConfigError("env file: transition vector needs n_states entries");
                    transition.insert(transition.end(), probs.begin(), probs.end());
                }
            }
        }
        for (const auto& layer : rw) {
            for (const auto& row_s : layer) {
                auto vals = row_s.get<std::vector<double>>();
                if (vals.size() != static_cast<std::size_t>(A)) throw ConfigError("env file: reward row needs n_actions entries");
                reward.insert(reward.end(), vals.begin(), vals.end());
            }
        }
        auto xi = doc.at("initial_dist").get<std::vector<double>>();
        return MdpSpec(S, A, H, std::move(transition), std::move(reward),
                       Eigen::Map<const Vector>(xi.data(), static_cast<Eigen::Index>(xi.size())));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("env file: ") + e.what(), 0);
    }
}

std::uint64_t MdpSpec::hash() const {
    std::uint64_t h = fnv1a(&n_states_, sizeof n_states_);
    h = fnv1a(&n_actions_, sizeof n_actions_, h);
    h = fnv1a(&horizon_, sizeof horizon_, h);
    h = fnv1a(transition_.data(), transition_.size() * sizeof(double), h);
    h = fnv1a(reward_.data(), reward_.size() * sizeof(double), h);
    return fnv1a(initial_.data(), static_cast<std::size_t>(initial_.size()) * sizeof(double), h);
}

void check_dims(const MdpSpec& mdp, const ActionDistribution& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions()) {
        throw ConfigError("policy is defined on " + std::to_string(policy.n_states()) + "x" +
                          std::to_string(policy.n_actions()) + " but the MDP has " +
                          std::to_string(mdp.n_states()) + "x" + std::to_string(mdp.n_actions()));
    }
}

namespace {

// Shared backward pass. With `policy_grad` set, also runs the gradient recursion
//   grad Q_h = P_h ( score * Q_{h+1} + grad Q_{h+1} ).
ExactEvaluation backward_pass(const MdpSpec& mdp, const ActionDistribution& dist, const Policy* policy_grad) {
    check_dims(mdp, dist);
    const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
    const int m = policy_grad ? policy_grad->n_params() : 0;

    ExactEvaluation out;
    out.q.assign(H, Matrix::Zero(S, A));
    if (policy_grad) out.grad_q.assign(H, Matrix::Zero(static_cast<Eigen::Index>(S) * A, m));

    // Expected next values: next_v(s') = sum_a' pi Q, next_g(s', :) = sum_a' pi (score Q + grad Q).
    Vector next_v = Vector::Zero(S);
    Matrix next_g = Matrix::Zero(S, m);

    auto expected_at = [&](int h, Vector& v, Matrix& g) {
        for (int s = 0; s < S; ++s) {
            const Vector pi = dist.prob(h, s);
            double acc = 0.0;
            for (int a = 0; a < A; ++a) acc += pi[a] * out.q[h](s, a);
            v[s] = acc;
            if (!policy_grad) continue;
            Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
            for (int a = 0; a < A; ++a) row += pi[a] * out.grad_q[h].row(static_cast<Eigen::Index>(s) * A + a);
            const ParamRange range = policy_grad->score_support(h, s);
            const Matrix block = policy_grad->score_block(h, s);
            for (int a = 0; a < A; ++a) {
                row.segment(range.first, range.count) += (pi[a] * out.q[h](s, a)) * block.row(a);
            }
            g.row(s) = row;
        }
    };

    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const double* p = mdp.p_row(h, s, a);
                double acc = mdp.r(h, s, a);
                if (h + 1 < H) {
                    for (int s2 = 0; s2 < S; ++s2) {
                        if (p[s2] != 0.0) acc += p[s2] * next_v[s2];
                    }
                }
                out.q[h](s, a) = acc;
                if (policy_grad && h + 1 < H) {
                    auto row = out.grad_q[h].row(static_cast<Eigen::Index>(s) * A + a);
                    for (int s2 = 0; s2 < S; ++s2) {
                        if (p[s2] != 0.0) row += p[s2] * next_g.row(s2);
                    }
                }
            }
        }
        expected_at(h, next_v, next_g);
    }

    const Vector& xi = mdp.initial_dist();
    out.v = 0.0;
    for (int s = 0; s < S; ++s) out.v += xi[s] * next_v[s];
    if (policy_grad) {
        out.grad_v = Vector::Zero(m);
        for (int s = 0; s < S; ++s) {
            if (xi[s] != 0.0) out.grad_v += xi[s] * next_g.row(s).transpose();
        }
    }
    return out;
}

}  // namespace

ExactEvaluation exact_q_and_value(const MdpSpec& mdp, const ActionDistribution& policy) {
    return backward_pass(mdp, policy, nullptr);
}

ExactEvaluation exact_evaluation(const MdpSpec& mdp, const Policy& policy) {
    return backward_pass(mdp, policy, &policy);
}

Vector exact_policy_gradient(const MdpSpec& mdp, const Policy& policy) {
    return exact_evaluation(mdp, policy).grad_v;
}

OccupancyMeasure occupancy(const MdpSpec& mdp, const ActionDistribution& policy) {
    check_dims(mdp, policy);
    const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
    OccupancyMeasure occ;
    occ.mu.assign(H, Matrix::Zero(S, A));
    Vector state_dist = mdp.initial_dist();
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            if (state_dist[s] == 0.0) continue;
            occ.mu[h].row(s) = state_dist[s] * policy.prob(h, s).transpose();
        }
        if (h + 1 == H) break;
        Vector next = Vector::Zero(S);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const double w = occ.mu[h](s, a);
                if (w == 0.0) continue;
                const double* p = mdp.p_row(h, s, a);
                for (int s2 = 0; s2 < S; ++s2) next[s2] += w * p[s2];
            }
        }
        state_dist = next;
    }
    return occ;
}

OptimalSolution optimal_solution(const MdpSpec& mdp) {
    const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
    OptimalSolution sol;
    sol.q.assign(H, Matrix::Zero(S, A));
    sol.actions.assign(H, std::vector<int>(S, 0));
    Vector next_v = Vector::Zero(S);
    for (int h = H - 1; h >= 0; --h) {
        Vector v(S);
        for (int s = 0; s < S; ++s) {
            int best = 0;
            for (int a = 0; a < A; ++a) {
                const double* p = mdp.p_row(h, s, a);
                double acc = mdp.r(h, s, a);
                for (int s2 = 0; s2 < S; ++s2) acc += p[s2] * next_v[s2];
                sol.q[h](s, a) = acc;
                if (acc > sol.q[h](s, best)) best = a;
            }
            sol.actions[h][s] = best;
            v[s] = sol.q[h](s, best);
        }
        next_v = v;
    }
    sol.value = mdp.initial_dist().dot(next_v);
    return sol;
}

double optimal_value(const MdpSpec& mdp) { return optimal_solution(mdp).value; }

}  // namespace fpg
