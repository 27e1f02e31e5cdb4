// Command-line front end: estimation, sweeps, bootstrap and optimization runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "fpg/baselines.hpp"
#include "fpg/dataset.hpp"
#include "fpg/discounted.hpp"
#include "fpg/envs.hpp"
#include "fpg/experiments.hpp"
#include "fpg/fpg.hpp"
#include "fpg/inference.hpp"
#include "fpg/optimize.hpp"

namespace {

using namespace fpg;
using json = nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitDegenerate = 4;

struct Common {
    EnvConfig env;
    std::string env_file;
    std::string theta_file;
    std::string features_file;
    double beta = 5.0;
    std::uint64_t seed = 0;
    double lambda = kDefaultLambda;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--env", c.env.kind, "frozenlake_like | gridworld | cliffwalk_like | random_mdp")
        ->check(CLI::IsMember({"frozenlake_like", "gridworld", "cliffwalk_like", "random_mdp"}));
    cmd->add_option("--rows", c.env.rows, "gridworld rows");
    cmd->add_option("--cols", c.env.cols, "gridworld columns");
    cmd->add_option("--env-file", c.env_file, "MDP JSON file (overrides --env)");
    cmd->add_option("--horizon", c.env.horizon, "episode horizon H");
    cmd->add_option("--slip", c.env.slip, "slip / random-action probability");
    cmd->add_option("--states", c.env.n_states, "random_mdp state count");
    cmd->add_option("--actions", c.env.n_actions, "random_mdp action count");
    cmd->add_option("--env-seed", c.env.seed, "random_mdp generator seed");
    cmd->add_option("--theta", c.theta_file, "target policy parameters JSON (default: softmax of beta * Q*)");
    cmd->add_option("--beta", c.beta, "inverse temperature of the default target policy");
    cmd->add_option("--features", c.features_file, "feature map JSON (default: one-hot)");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--lambda", c.lambda, "ridge parameter");
    cmd->add_option("--out", c.out, "output path (default: stdout)");
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Setup {
    std::unique_ptr<MdpSpec> mdp;
    std::unique_ptr<Policy> target;
    std::unique_ptr<FeatureMap> phi;
};

Setup build(const Common& c) {
    Setup out;
    EnvConfig env = c.env;
    if (!c.env_file.empty()) {
        env.kind = "file";
        env.path = c.env_file;
    }
    out.mdp = std::make_unique<MdpSpec>(make_env(env));
    const int S = out.mdp->n_states(), A = out.mdp->n_actions();
    if (c.theta_file.empty()) {
        out.target = softmax_of_optimal(*out.mdp, c.beta);
    } else {
        try {
            out.target = std::make_unique<SoftmaxTabularPolicy>(S, A, theta_from_json(read_file(c.theta_file)));
        } catch (const ParseError& e) {
            throw ConfigError(c.theta_file + ": " + e.what());
        }
    }
    out.phi = std::make_unique<FeatureMap>(c.features_file.empty() ? FeatureMap::one_hot(S, A)
                                                                   : FeatureMap::from_json(read_file(c.features_file)));
    out.phi->check_dims(S, A);
    return out;
}

// Writes to --out or stdout.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
    if (path.empty()) {
        fn(std::cout);
        return;
    }
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path + "'");
    fn(f);
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int count) {
    if (count < 1) throw ConfigError("--seeds must be >= 1");
    std::vector<std::uint64_t> out;
    for (int i = 0; i < count; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
    return out;
}

Dataset obtain_data(const Setup& s, const std::string& data_path, std::size_t K, double epsilon, std::uint64_t seed) {
    if (!data_path.empty()) return load_jsonl(data_path);
    if (K == 0) throw InputError("--episodes must be >= 1");
    const EpsilonGreedyWrapper behavior(borrow(*s.target), epsilon);
    return simulate(*s.mdp, behavior, K, seed);
}

Vector first_state_dist(const Dataset& data, int n_states) {
    Vector xi = Vector::Zero(n_states);
    for (const Episode& ep : data.episodes()) {
        if (ep.steps.front().s >= n_states) throw ConfigError("dataset state id exceeds the environment");
        xi[ep.steps.front().s] += 1.0;
    }
    return xi / static_cast<double>(data.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Off-policy policy-gradient estimation with fitted policy gradient iteration"};
    app.require_subcommand(1);

    // estimate
    Common est_c;
    std::string est_data, est_method = "fpg";
    std::size_t est_K = 500;
    double est_eps = 0.0, est_gamma = 0.0;
    auto* est = app.add_subcommand("estimate", "estimate the policy gradient from data");
    add_common(est, est_c);
    est->add_option("--data", est_data, "dataset JSONL (default: simulate)");
    est->add_option("--episodes", est_K, "episodes to simulate when --data is absent");
    est->add_option("--epsilon", est_eps, "epsilon-greedy behavior for simulated data");
    est->add_option("--method", est_method, "fpg | model_based | is | gpomdp | reinforce")
        ->check(CLI::IsMember({"fpg", "model_based", "is", "gpomdp", "reinforce"}));
    est->add_option("--gamma", est_gamma, "discount in (0,1): use the time-homogeneous discounted estimator");

    // simulate
    Common sim_c;
    std::size_t sim_K = 500;
    double sim_eps = 0.0;
    auto* sim = app.add_subcommand("simulate", "write simulated episodes as JSONL");
    add_common(sim, sim_c);
    sim->add_option("--episodes", sim_K, "number of episodes");
    sim->add_option("--epsilon", sim_eps, "epsilon-greedy mixing with the target policy");

    // sweep-k
    Common sk_c;
    std::vector<std::size_t> sk_K = {50, 100, 200, 400, 800, 1600, 3200};
    std::vector<std::string> sk_methods = {"fpg"};
    double sk_eps = 0.0;
    int sk_seeds = 5;
    auto* sk = app.add_subcommand("sweep-k", "metrics across dataset sizes");
    add_common(sk, sk_c);
    sk->add_option("--episodes", sk_K, "comma-separated K values")->delimiter(',');
    sk->add_option("--method", sk_methods, "comma-separated methods")->delimiter(',');
    sk->add_option("--epsilon", sk_eps, "epsilon-greedy behavior");
    sk->add_option("--seeds", sk_seeds, "number of seeds starting at --seed");

    // sweep-shift
    Common ss_c;
    std::size_t ss_K = 200;
    std::vector<double> ss_eps = {0.0, 0.1, 0.3, 0.5, 0.7};
    std::vector<std::string> ss_methods = {"fpg", "is"};
    int ss_seeds = 5;
    auto* ss = app.add_subcommand("sweep-shift", "metrics across behavior policies");
    add_common(ss, ss_c);
    ss->add_option("--episodes", ss_K, "dataset size K");
    ss->add_option("--epsilon", ss_eps, "comma-separated epsilon values")->delimiter(',');
    ss->add_option("--method", ss_methods, "comma-separated methods")->delimiter(',');
    ss->add_option("--seeds", ss_seeds, "number of seeds starting at --seed");

    // bootstrap
    Common bs_c;
    std::string bs_data;
    std::size_t bs_K = 200, bs_B = 200;
    double bs_eps = 0.0;
    auto* bs = app.add_subcommand("bootstrap", "episode bootstrap of the FPG estimate");
    add_common(bs, bs_c);
    bs->add_option("--data", bs_data, "dataset JSONL (default: simulate)");
    bs->add_option("--episodes", bs_K, "episodes to simulate when --data is absent");
    bs->add_option("--epsilon", bs_eps, "epsilon-greedy behavior for simulated data");
    bs->add_option("--replicates", bs_B, "number of bootstrap replicates B");

    // optimize
    Common op_c;
    std::string op_method = "fpg", op_data;
    AscendConfig op_cfg;
    std::size_t op_K = 500;
    double op_eps = 0.3;
    auto* op = app.add_subcommand("optimize", "policy optimization from a uniform start");
    add_common(op, op_c);
    op->add_option("--method", op_method, "fpg | reinforce | offline")
        ->check(CLI::IsMember({"fpg", "reinforce", "offline"}));
    op->add_option("--iters", op_cfg.iters, "iterations");
    op->add_option("--step", op_cfg.step, "step size");
    op->add_option("--window", op_cfg.window, "replay window W (fpg)");
    op->add_option("--episodes", op_cfg.episodes_per_iter, "episodes per iteration (online) ");
    op->add_option("--data", op_data, "offline dataset JSONL (offline; default: simulate)");
    op->add_option("--offline-episodes", op_K, "offline dataset size when --data is absent");
    op->add_option("--epsilon", op_eps, "epsilon-greedy behavior for the offline dataset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*est) {
            const Setup s = build(est_c);
            const Dataset data = obtain_data(s, est_data, est_K, est_eps, est_c.seed);
            const Vector xi = est_data.empty() ? s.mdp->initial_dist() : first_state_dist(data, s.mdp->n_states());
            GradientEstimate g;
            if (est_gamma != 0.0) {
                if (est_method != "fpg") throw ConfigError("--gamma is only supported with --method fpg");
                g = discounted_fpg_estimate(discounted_fit(data, *s.target, *s.phi, est_c.lambda, est_gamma),
                                            *s.target, *s.phi, xi);
                g.episodes = data.size();
                g.lambda = est_c.lambda;
                g.seed = data.meta().seed;
            } else {
                const EpsilonGreedyWrapper behavior(borrow(*s.target), est_eps);
                g = run_method(est_method, data, *s.target, behavior, *s.phi, est_c.lambda, xi);
            }
            json j;
            j["method"] = g.method;
            j["gradient"] = std::vector<double>(g.grad.data(), g.grad.data() + g.grad.size());
            j["m"] = g.grad.size();
            j["episodes"] = data.size();
            j["horizon"] = data.horizon();
            j["lambda"] = est_c.lambda;
            j["seed"] = data.meta().seed;
            j["wall_ms"] = g.wall_ms;
            j["warnings"] = g.warnings;
            j["theta_hash"] = hex64(theta_hash(s.target->params()));
            if (est_gamma == 0.0 && data.horizon() == s.mdp->horizon()) {
                const Vector exact = exact_policy_gradient(*s.mdp, *s.target);
                if (exact.norm() > 0.0) {
                    const auto [cos, rel] = metric_cos_and_rel(g.grad, exact);
                    j["cos_angle"] = cos;
                    j["rel_err"] = rel;
                }
            }
            for (const auto& w : g.warnings) std::cerr << "warning: " << w << '\n';
            emit(est_c.out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
        } else if (*sim) {
            const Setup s = build(sim_c);
            Dataset data = obtain_data(s, "", sim_K, sim_eps, sim_c.seed);
            emit(sim_c.out, [&](std::ostream& o) { save_jsonl(data, o); });
        } else if (*sk) {
            const Setup s = build(sk_c);
            SweepConfig cfg;
            cfg.episodes = sk_K;
            cfg.epsilons = {sk_eps};
            cfg.seeds = seed_list(sk_c.seed, sk_seeds);
            cfg.methods = sk_methods;
            cfg.lambda = sk_c.lambda;
            const auto rows = sweep(*s.mdp, *s.target, *s.phi, cfg);
            emit(sk_c.out, [&](std::ostream& o) { write_metrics_csv(rows, o); });
        } else if (*ss) {
            const Setup s = build(ss_c);
            SweepConfig cfg;
            cfg.episodes = {ss_K};
            cfg.epsilons = ss_eps;
            cfg.seeds = seed_list(ss_c.seed, ss_seeds);
            cfg.methods = ss_methods;
            cfg.lambda = ss_c.lambda;
            const auto rows = sweep(*s.mdp, *s.target, *s.phi, cfg);
            emit(ss_c.out, [&](std::ostream& o) { write_metrics_csv(rows, o); });
        } else if (*bs) {
            const Setup s = build(bs_c);
            const Dataset data = obtain_data(s, bs_data, bs_K, bs_eps, bs_c.seed);
            BootstrapConfig cfg;
            cfg.lambda = bs_c.lambda;
            cfg.xi = bs_data.empty() ? s.mdp->initial_dist() : first_state_dist(data, s.mdp->n_states());
            const Matrix samples = bootstrap(data, *s.target, *s.phi, cfg, bs_B, bs_c.seed);
            emit(bs_c.out, [&](std::ostream& o) {
                o << "# fpg-bootstrap v1\n";
                for (Eigen::Index j = 0; j < samples.cols(); ++j) o << (j ? "," : "") << "g" << j;
                o << '\n';
                o.precision(17);
                for (Eigen::Index b = 0; b < samples.rows(); ++b) {
                    for (Eigen::Index j = 0; j < samples.cols(); ++j) o << (j ? "," : "") << samples(b, j);
                    o << '\n';
                }
            });
        } else if (*op) {
            const Setup s = build(op_c);
            const SoftmaxTabularPolicy init(s.mdp->n_states(), s.mdp->n_actions());
            OptimizationTrace trace;
            if (op_method == "offline") {
                const Dataset data = obtain_data(s, op_data, op_K, op_eps, op_c.seed);
                trace = offline_ascend(*s.mdp, data, init, *s.phi, op_cfg.step, op_cfg.iters, op_c.lambda);
            } else {
                op_cfg.estimator = op_method;
                op_cfg.lambda = op_c.lambda;
                op_cfg.seed = op_c.seed;
                trace = ascend(*s.mdp, init, *s.phi, op_cfg);
            }
            if (trace.diverged) std::cerr << "warning: " << trace.diagnostic << '\n';
            emit(op_c.out, [&](std::ostream& o) { write_trace_csv(trace, o); });
        }
    } catch (const DegenerateTargetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
