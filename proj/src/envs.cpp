#include "fpg/envs.hpp"

#include <fstream>
#include <sstream>

namespace fpg {
namespace {

constexpr int kLeft = 0, kDown = 1, kRight = 2, kUp = 3;

int move(int rows, int cols, int s, int action) {
    int r = s / cols, c = s % cols;
    switch (action) {
        case kLeft: c = std::max(c - 1, 0); break;
        case kDown: r = std::min(r + 1, rows - 1); break;
        case kRight: c = std::min(c + 1, cols - 1); break;
        case kUp: r = std::max(r - 1, 0); break;
        default: break;
    }
    return r * cols + c;
}

void check_prob(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void EnvConfig::validate() const {
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    check_prob(slip, "slip");
    if (kind == "frozenlake_like") {
        if (slip > 0.5) throw ConfigError("frozenlake slip must be <= 1/2 (two lateral directions)");
    } else if (kind == "random_mdp") {
        if (n_states < 1 || n_actions < 1) throw ConfigError("random_mdp needs positive state and action counts");
    } else if (kind == "file") {
        if (path.empty()) throw ConfigError("env kind 'file' needs a path");
    } else if (kind == "gridworld") {
        if (slip > 0.5) throw ConfigError("gridworld slip must be <= 1/2 (two lateral directions)");
        if (rows < 1 || cols < 1 || rows * cols < 2) throw ConfigError("gridworld needs at least two cells");
    } else if (kind != "cliffwalk_like") {
        throw ConfigError("unknown env kind '" + kind + "'");
    }
}

MdpSpec gridworld(const std::vector<std::string>& map, double slip, int horizon) {
    check_prob(slip, "slip");
    if (slip > 0.5) throw ConfigError("gridworld slip must be <= 1/2 (two lateral directions)");
    if (map.empty() || map.front().empty()) throw ConfigError("gridworld map is empty");
    const int R = static_cast<int>(map.size()), C = static_cast<int>(map.front().size());
    const int S = R * C, A = 4;
    int start = -1;
    for (int i = 0; i < R; ++i) {
        if (static_cast<int>(map[i].size()) != C) throw ConfigError("gridworld map rows differ in length");
        for (int j = 0; j < C; ++j) {
            const char ch = map[i][j];
            if (std::string("SFHG").find(ch) == std::string::npos) {
                throw ConfigError(std::string("gridworld map has unknown cell '") + ch + "'");
            }
            if (ch == 'S') {
                if (start >= 0) throw ConfigError("gridworld map has more than one start cell");
                start = i * C + j;
            }
        }
    }
    if (start < 0) throw ConfigError("gridworld map has no start cell");
    std::vector<double> p(static_cast<std::size_t>(S) * A * S, 0.0);
    std::vector<double> r(static_cast<std::size_t>(S) * A, 0.0);
    auto cell = [&](int s) { return map[s / C][s % C]; };
    for (int s = 0; s < S; ++s) {
        const bool absorbing = cell(s) == 'H' || cell(s) == 'G';
        for (int a = 0; a < A; ++a) {
            double* row = &p[(static_cast<std::size_t>(s) * A + a) * S];
            if (absorbing) {
                row[s] = 1.0;
                continue;
            }
            const int lateral[2] = {(a + 1) % 4, (a + 3) % 4};
            row[move(R, C, s, a)] += 1.0 - 2.0 * slip;
            for (int b : lateral) row[move(R, C, s, b)] += slip;
            for (int t = 0; t < S; ++t) {
                if (cell(t) == 'G') r[static_cast<std::size_t>(s) * A + a] += row[t];
            }
        }
    }
    Vector xi = Vector::Zero(S);
    xi[start] = 1.0;
    return MdpSpec(S, A, horizon, std::move(p), std::move(r), std::move(xi));
}

MdpSpec frozenlake_like(double slip, int horizon) {
    return gridworld({"SFFF", "FHFH", "FFFH", "HFFG"}, slip, horizon);
}

MdpSpec open_gridworld(int rows, int cols, double slip, int horizon) {
    if (rows < 1 || cols < 1 || rows * cols < 2) throw ConfigError("open gridworld needs at least two cells");
    std::vector<std::string> map(rows, std::string(cols, 'F'));
    map.front().front() = 'S';
    map.back().back() = 'G';
    return gridworld(map, slip, horizon);
}

MdpSpec cliffwalk_like(double random_action, int horizon) {
    check_prob(random_action, "random-action probability");
    constexpr int R = 4, C = 12, S = R * C, A = 4;
    const int start = (R - 1) * C, goal = R * C - 1;
    auto is_cliff = [&](int s) { return s > start && s < goal; };
    std::vector<double> p(static_cast<std::size_t>(S) * A * S, 0.0);
    std::vector<double> r(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            double* row = &p[(static_cast<std::size_t>(s) * A + a) * S];
            double& rew = r[static_cast<std::size_t>(s) * A + a];
            if (s == goal || is_cliff(s)) {
                // Cliff cells are never occupied; give them the goal's self-loop shape.
                row[s] = 1.0;
                rew = s == goal ? 1.0 : 0.0;
                continue;
            }
            for (int b = 0; b < A; ++b) {
                const double q = (b == a ? 1.0 - random_action : 0.0) + random_action / A;
                if (q == 0.0) continue;
                const int t = move(R, C, s, b);
                if (is_cliff(t)) {
                    row[start] += q;
                } else {
                    row[t] += q;
                    rew += q * 0.99;
                }
            }
        }
    }
    Vector xi = Vector::Zero(S);
    xi[start] = 1.0;
    return MdpSpec(S, A, horizon, std::move(p), std::move(r), std::move(xi));
}

MdpSpec random_mdp(int n_states, int n_actions, int horizon, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1) throw ConfigError("random_mdp needs positive state and action counts");
    Rng rng = stream_rng(seed, 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::size_t SA = static_cast<std::size_t>(n_states) * n_actions;
    std::vector<double> p(SA * n_states);
    for (std::size_t row = 0; row < SA; ++row) {
        double sum = 0.0;
        for (int t = 0; t < n_states; ++t) sum += p[row * n_states + t] = unif(rng) + 1e-3;
        for (int t = 0; t < n_states; ++t) p[row * n_states + t] /= sum;
    }
    std::vector<double> r(SA);
    for (double& x : r) x = unif(rng);
    Vector xi(n_states);
    for (int s = 0; s < n_states; ++s) xi[s] = unif(rng) + 1e-3;
    xi /= xi.sum();
    return MdpSpec(n_states, n_actions, horizon, std::move(p), std::move(r), std::move(xi));
}

MdpSpec make_env(const EnvConfig& config) {
    config.validate();
    if (config.kind == "frozenlake_like") return frozenlake_like(config.slip, config.horizon);
    if (config.kind == "gridworld") return open_gridworld(config.rows, config.cols, config.slip, config.horizon);
    if (config.kind == "cliffwalk_like") return cliffwalk_like(config.slip, config.horizon);
    if (config.kind == "random_mdp") {
        return random_mdp(config.n_states, config.n_actions, config.horizon, config.seed);
    }
    std::ifstream in(config.path);
    if (!in) throw ConfigError("cannot open env file '" + config.path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    try {
        return MdpSpec::from_json(text.str());
    } catch (const Error& e) {
        throw ConfigError(config.path + ": " + e.what());
    }
}

std::unique_ptr<SoftmaxTabularPolicy> softmax_of_optimal(const MdpSpec& mdp, double beta) {
    if (!std::isfinite(beta)) throw InputError("beta must be finite");
    const OptimalSolution opt = optimal_solution(mdp);
    const int S = mdp.n_states(), A = mdp.n_actions();
    Vector theta(S * A);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) theta[s * A + a] = beta * opt.q[0](s, a);
    }
    return std::make_unique<SoftmaxTabularPolicy>(S, A, std::move(theta));
}

}  // namespace fpg
