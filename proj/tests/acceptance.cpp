// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fpg/baselines.hpp"
#include "fpg/dataset.hpp"
#include "fpg/discounted.hpp"
#include "fpg/envs.hpp"
#include "fpg/experiments.hpp"
#include "fpg/fpg.hpp"
#include "fpg/inference.hpp"
#include "fpg/optimize.hpp"

using namespace fpg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

Vector gaussian(Rng& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = g(rng);
    return v;
}

Matrix gaussian(Rng& rng, int r, int c) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = g(rng);
    return m;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// The smooth 3-state benchmark shared by the inference criteria.
struct ThreeState {
    MdpSpec mdp = random_mdp(3, 2, 5, 7);
    SoftmaxTabularPolicy target{3, 2, Vector((Vector(6) << 0.4, -0.3, -0.5, 0.6, 0.2, -0.1).finished())};
    EpsilonGreedyWrapper behavior{borrow(target), 0.3};
    FeatureMap phi = FeatureMap::one_hot(3, 2);
};

// 1. FPG equals the model-based plug-in route.
Outcome prop2_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng = stream_rng(1001, trial);
        const int S = 5, A = uniform_int(rng, 2, 3), H = uniform_int(rng, 1, 6);
        const int d = uniform_int(rng, 1, 20);
        const MdpSpec mdp = random_mdp(S, A, H, 5000 + trial);
        const FeatureMap phi = FeatureMap::from_rows(S, A, gaussian(rng, S * A, d));
        std::unique_ptr<Policy> target;
        if (trial % 2 == 0) {
            target = std::make_unique<SoftmaxTabularPolicy>(S, A, gaussian(rng, S * A));
        } else {
            const int m = uniform_int(rng, 1, 6);
            target = std::make_unique<LinearSoftmaxPolicy>(S, A, gaussian(rng, S * A, m), gaussian(rng, m));
        }
        const SoftmaxTabularPolicy behavior(S, A, gaussian(rng, S * A));
        const std::size_t K = static_cast<std::size_t>(uniform_int(rng, 10, 200));
        const double lambda = std::exp(std::uniform_real_distribution<double>(std::log(0.1), 0.0)(rng));
        const Dataset data = simulate(mdp, behavior, K, 9000 + trial);
        const Vector a = fpg_estimate(data, *target, phi, lambda, mdp.initial_dist()).grad;
        const Vector b = model_based_estimate(data, *target, phi, lambda, mdp.initial_dist()).grad;
        worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-10 && t < 10.0, "max_abs_diff=" + fmt("%.3e", worst) + " (<= 1e-10), time=" + fmt("%.2f", t) + "s (< 10s)"};
}

// 2. Policy-gradient Bellman recursion against central differences of the exact value.
Outcome oracle_gradient() {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng = stream_rng(2002, trial);
        const int S = uniform_int(rng, 2, 6), A = uniform_int(rng, 2, 4), H = uniform_int(rng, 1, 6);
        const MdpSpec mdp = random_mdp(S, A, H, 6000 + trial);
        std::unique_ptr<Policy> pi;
        if (trial % 2 == 0) {
            pi = std::make_unique<SoftmaxTabularPolicy>(S, A, gaussian(rng, S * A));
        } else {
            const int m = uniform_int(rng, 1, 5);
            pi = std::make_unique<LinearSoftmaxPolicy>(S, A, gaussian(rng, S * A, m), gaussian(rng, m));
        }
        const Vector g = exact_policy_gradient(mdp, *pi);
        Vector fd(g.size());
        const double eps = 1e-5;
        for (int j = 0; j < g.size(); ++j) {
            Vector up = pi->params(), dn = pi->params();
            up[j] += eps;
            dn[j] -= eps;
            fd[j] = (exact_q_and_value(mdp, *pi->with_params(up)).v - exact_q_and_value(mdp, *pi->with_params(dn)).v) /
                    (2 * eps);
        }
        worst = std::max(worst, (g - fd).norm() / g.norm());
    }
    return {worst <= 1e-4, "max_rel_err=" + fmt("%.3e", worst) + " (<= 1e-4)"};
}

// 3. One-hot features, lambda = 0, data whose empirical model is the true model.
Outcome certainty_equivalence() {
    double worst = 0.0;
    for (int S : {2, 3, 4}) {
        const int A = S, H = 4;
        Rng rng = stream_rng(3003, S);
        // s' = (s + a) mod S, time-varying rewards.
        std::vector<double> p(static_cast<std::size_t>(S) * A * S, 0.0), r(static_cast<std::size_t>(H) * S * A);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) p[(static_cast<std::size_t>(s) * A + a) * S + (s + a) % S] = 1.0;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (double& x : r) x = unif(rng);
        Vector xi = Vector::Constant(S, 1.0 / S);
        const MdpSpec mdp(S, A, H, p, r, xi);
        // Episode (s0, a) repeats action a from s0; over all (s0, a) every (h, s, a) appears once.
        std::vector<Episode> eps;
        for (int s0 = 0; s0 < S; ++s0) {
            for (int a = 0; a < A; ++a) {
                Episode ep;
                int s = s0;
                for (int h = 0; h < H; ++h) {
                    const int next = (s + a) % S;
                    ep.steps.push_back({s, a, mdp.r(h, s, a), next});
                    s = next;
                }
                eps.push_back(ep);
            }
        }
        const Dataset data(H, eps);
        const SoftmaxTabularPolicy pi(S, A, gaussian(rng, S * A));
        const Vector est = fpg_estimate(data, pi, FeatureMap::one_hot(S, A), 0.0, xi).grad;
        worst = std::max(worst, (est - exact_policy_gradient(mdp, pi)).cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-8, "max_abs_diff=" + fmt("%.3e", worst) + " (<= 1e-8)"};
}

// 4. Error decays like K^{-1/2}.
Outcome consistency_rate() {
    const auto t0 = std::chrono::steady_clock::now();
    const MdpSpec mdp = open_gridworld(4, 4, 1.0 / 3.0, 10);
    const auto target = softmax_of_optimal(mdp, 5.0);
    SweepConfig cfg;
    cfg.episodes = {50, 100, 200, 400, 800, 1600, 3200};
    for (std::uint64_t s = 0; s < 20; ++s) cfg.seeds.push_back(400 + s);
    const auto rows = sweep(mdp, *target, FeatureMap::one_hot(16, 4), cfg);
    const double norm = exact_policy_gradient(mdp, *target).norm();
    std::vector<double> lx, ly;
    std::string curve;
    for (std::size_t K : cfg.episodes) {
        std::vector<double> errs;
        for (const MetricRow& r : rows)
            if (r.K == K) errs.push_back(r.rel_err * norm);
        const double med = median(errs);
        lx.push_back(std::log(static_cast<double>(K)));
        ly.push_back(std::log(med));
        curve += (curve.empty() ? "" : " ") + fmt("%.3g", med);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    const double slope = sxy / sxx;
    const double t = seconds_since(t0);
    return {slope >= -0.65 && slope <= -0.35 && t < 120.0,
            "slope=" + fmt("%.3f", slope) + " (in [-0.65, -0.35]), median_l2=[" + curve + "], time=" + fmt("%.1f", t) +
                "s (< 120s)"};
}

// 5. Robustness to an epsilon-greedy(0.5) behavior.
Outcome shift_robustness() {
    const auto t0 = std::chrono::steady_clock::now();
    const MdpSpec mdp = frozenlake_like(1.0 / 3.0, 20);
    const auto target = softmax_of_optimal(mdp, 5.0);
    SweepConfig cfg;
    cfg.episodes = {200};
    cfg.epsilons = {0.5};
    cfg.methods = {"fpg", "is"};
    cfg.seeds.clear();
    for (std::uint64_t s = 0; s < 20; ++s) cfg.seeds.push_back(500 + s);
    const auto rows = sweep(mdp, *target, FeatureMap::one_hot(16, 4), cfg);
    auto med = [&](const std::string& m, double MetricRow::*f) {
        std::vector<double> v;
        for (const MetricRow& r : rows)
            if (r.method == m) v.push_back(r.*f);
        return median(v);
    };
    const double rf = med("fpg", &MetricRow::rel_err), ri = med("is", &MetricRow::rel_err);
    const double cf = med("fpg", &MetricRow::cos_angle), ci = med("is", &MetricRow::cos_angle);
    const double t = seconds_since(t0);
    return {rf < ri && cf > ci && t < 60.0,
            "median rel_err fpg=" + fmt("%.3f", rf) + " < is=" + fmt("%.3f", ri) + ", median cos fpg=" + fmt("%.3f", cf) +
                " > is=" + fmt("%.3f", ci) + ", time=" + fmt("%.1f", t) + "s (< 60s)"};
}

// 6. sqrt(K)-scaled error covariance against the plug-in Lambda-hat.
Outcome asymptotic_normality() {
    const auto t0 = std::chrono::steady_clock::now();
    const ThreeState env;
    const Vector exact = exact_policy_gradient(env.mdp, env.target);
    const int R = 1000, m = env.target.n_params();
    const std::size_t K = 100;
    Matrix errors(R, m);
    std::vector<Matrix> lambdas(R);
    parallel_for(R, [&](std::size_t r) {
        const Dataset data = simulate(env.mdp, env.behavior, K, 60000 + r);
        const Vector est = fpg_estimate(data, env.target, env.phi, kDefaultLambda, env.mdp.initial_dist()).grad;
        errors.row(static_cast<Eigen::Index>(r)) = std::sqrt(static_cast<double>(K)) * (est - exact).transpose();
        lambdas[r] = plugin_lambda_hat(data, env.target, env.phi, kDefaultLambda, env.mdp.initial_dist()).lambda_hat;
    });
    Matrix lambda_mean = Matrix::Zero(m, m);
    for (const Matrix& l : lambdas) lambda_mean += l / R;
    const Matrix centered = errors.rowwise() - errors.colwise().mean();
    const Matrix cov = centered.transpose() * centered / (R - 1);
    const double rel = (cov - lambda_mean).norm() / cov.norm();

    const Vector z = centered.col(0) / std::sqrt(cov(0, 0));
    const double skew = z.array().cube().mean();
    const double kurt = z.array().square().square().mean() - 3.0;
    const double t = seconds_since(t0);
    return {rel <= 0.25 && std::abs(skew) <= 0.3 && std::abs(kurt) <= 0.6 && t < 120.0,
            "frobenius_rel_diff=" + fmt("%.3f", rel) + " (<= 0.25), skew=" + fmt("%.3f", skew) +
                " (|.| <= 0.3), excess_kurtosis=" + fmt("%.3f", kurt) + " (|.| <= 0.6), time=" + fmt("%.1f", t) +
                "s (< 120s)"};
}

// 7. Trajectory IS is unbiased.
Outcome is_unbiased() {
    const MdpSpec mdp = random_mdp(2, 2, 3, 77);
    const SoftmaxTabularPolicy target(2, 2, Vector((Vector(4) << 0.5, -0.5, -0.2, 0.8).finished()));
    const EpsilonGreedyWrapper behavior(borrow(target), 0.5);
    const Vector exact = exact_policy_gradient(mdp, target);
    const int R = 2000;
    Matrix est(R, 4);
    parallel_for(R, [&](std::size_t r) {
        const Dataset data = simulate(mdp, behavior, 20, 70000 + r);
        est.row(static_cast<Eigen::Index>(r)) = is_estimate(data, target, behavior).estimate.grad.transpose();
    });
    const Vector mean = est.colwise().mean().transpose();
    const Matrix centered = est.rowwise() - mean.transpose();
    const Vector se = (centered.array().square().colwise().sum() / (R - 1)).sqrt().transpose() / std::sqrt(R);
    const double worst = ((mean - exact).cwiseAbs().array() / se.array()).maxCoeff();
    return {worst <= 3.0, "max |mean - exact| / SE = " + fmt("%.2f", worst) + " (<= 3)"};
}

// 8. Discounted variant: resolvent vs Neumann series, and exactness under full coverage.
Outcome discounted() {
    const double gamma = 0.9;
    double neumann_gap = 0.0;
    for (int trial = 0; trial < 3; ++trial) {
        const MdpSpec mdp = random_mdp(4, 2, 6, 8000 + trial);
        Rng rng = stream_rng(8008, trial);
        const SoftmaxTabularPolicy pi(4, 2, gaussian(rng, 8));
        const FeatureMap phi = FeatureMap::one_hot(4, 2);
        const EpsilonGreedyWrapper behavior(borrow(pi), 0.5);
        const DiscountedFit fit = discounted_fit(simulate(mdp, behavior, 200, 8100 + trial), pi, phi, 1e-6, gamma);
        const Matrix gm = gamma * fit.M;
        Vector w = Vector::Zero(fit.w_r.size()), term = fit.w_r;
        for (int n = 0; n < 2000 && term.norm() > 1e-18; ++n) {
            w += term;
            term = gm * term;
        }
        neumann_gap = std::max(neumann_gap, (w - fit.w).cwiseAbs().maxCoeff());
        for (std::size_t j = 0; j < fit.grad_w.size(); ++j) {
            Vector g = Vector::Zero(w.size());
            Vector t = gamma * fit.grad_M[j] * fit.w;
            for (int n = 0; n < 2000 && t.norm() > 1e-18; ++n) {
                g += t;
                t = gm * t;
            }
            neumann_gap = std::max(neumann_gap, (g - fit.grad_w[j]).cwiseAbs().maxCoeff());
        }
    }

    // Transition probabilities are multiples of 1/4, so four single-step episodes
    // per (s, a) reproduce the model exactly.
    const int S = 3, A = 2;
    Rng rng = stream_rng(8888, 0);
    std::vector<double> p(static_cast<std::size_t>(S) * A * S, 0.0), r(S * A);
    std::vector<Episode> eps;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
            const double rew = unif(rng);
            r[s * A + a] = rew;
            for (int i = 0; i < 4; ++i) {
                const int next = uniform_int(rng, 0, S - 1);
                p[(static_cast<std::size_t>(s) * A + a) * S + next] += 0.25;
                eps.push_back(Episode{{Step{s, a, rew, next}}});
            }
        }
    }
    const Vector xi = (Vector(S) << 0.5, 0.3, 0.2).finished();
    const SoftmaxTabularPolicy pi(S, A, gaussian(rng, S * A));
    const FeatureMap phi = FeatureMap::one_hot(S, A);
    const DiscountedFit fit = discounted_fit(Dataset(1, eps), pi, phi, 0.0, gamma);
    const Vector est = discounted_fpg_estimate(fit, pi, phi, xi).grad;
    int H = 1;
    while (std::pow(gamma, H) >= 1e-6) ++H;
    std::vector<double> scale(H);
    for (int h = 0; h < H; ++h) scale[h] = std::pow(gamma, h);
    const MdpSpec truncated = MdpSpec(S, A, H, p, r, xi).with_reward_scale(scale);
    const Vector exact = exact_policy_gradient(truncated, pi);
    const double rel = (est - exact).norm() / exact.norm();
    return {neumann_gap <= 1e-8 && rel <= 1e-3,
            "resolvent_vs_neumann=" + fmt("%.3e", neumann_gap) + " (<= 1e-8), full_coverage_rel_err=" + fmt("%.3e", rel) +
                " (<= 1e-3, H_trunc=" + std::to_string(H) + ")"};
}

// 9. Percentile bootstrap coverage and shrinking spread.
Outcome bootstrap_coverage() {
    const ThreeState env;
    const Vector exact = exact_policy_gradient(env.mdp, env.target);
    const int m = env.target.n_params(), trials = 100;
    BootstrapConfig cfg;
    cfg.xi = env.mdp.initial_dist();
    auto run = [&](std::size_t K, std::vector<int>& covered, std::vector<double>& widths) {
        covered.assign(m, 0);
        for (int t = 0; t < trials; ++t) {
            const Dataset data = simulate(env.mdp, env.behavior, K, 90000 + 1000 * K + t);
            const auto iv = percentile_intervals(bootstrap(data, env.target, env.phi, cfg, 200, 91000 + t), 0.9);
            for (int j = 0; j < m; ++j) {
                covered[j] += iv[j].lo <= exact[j] && exact[j] <= iv[j].hi;
                widths.push_back(iv[j].hi - iv[j].lo);
            }
        }
    };
    std::vector<int> cov200, cov500;
    std::vector<double> w200, w500;
    run(200, cov200, w200);
    run(500, cov500, w500);
    const int worst = *std::min_element(cov200.begin(), cov200.end());
    const double m200 = median(w200), m500 = median(w500);
    return {worst >= 80 && m500 < m200,
            "min_coverage=" + std::to_string(worst) + "/100 (>= 80), median_width K=200: " + fmt("%.4f", m200) +
                " > K=500: " + fmt("%.4f", m500)};
}

// 10. FPG-REINFORCE vs REINFORCE, and offline FPG ascent.
Outcome optimization() {
    const auto t0 = std::chrono::steady_clock::now();
    const MdpSpec grid = open_gridworld(4, 4, 1.0 / 3.0, 10);
    const double threshold = 0.8 * optimal_value(grid);
    const SoftmaxTabularPolicy init(16, 4);
    const FeatureMap phi = FeatureMap::one_hot(16, 4);
    std::vector<double> ratio;
    std::vector<double> e_fpg, e_rf;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        AscendConfig c;
        c.iters = 150;
        c.episodes_per_iter = 20;
        c.seed = seed;
        c.estimator = "fpg";
        c.step = 20.0;
        c.window = 5;
        const std::size_t a = ascend(grid, init, phi, c).episodes_to_reach(threshold);
        c.estimator = "reinforce";
        c.step = 10.0;
        const std::size_t b = ascend(grid, init, phi, c).episodes_to_reach(threshold);
        e_fpg.push_back(a == SIZE_MAX ? std::numeric_limits<double>::infinity() : static_cast<double>(a));
        e_rf.push_back(b == SIZE_MAX ? std::numeric_limits<double>::infinity() : static_cast<double>(b));
    }
    const double med_fpg = median(e_fpg), med_rf = median(e_rf);

    const MdpSpec lake = frozenlake_like(0.0, 20);
    const double v_star = optimal_value(lake);
    const auto target = softmax_of_optimal(lake, 5.0);
    const EpsilonGreedyWrapper behavior(borrow(*target), 0.3);
    std::vector<double> finals;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Dataset data = simulate(lake, behavior, 500, 1000 + seed);
        finals.push_back(offline_ascend(lake, data, init, phi, 5.0, 200).rows.back().value);
    }
    const double med_final = median(finals);
    const double t = seconds_since(t0);
    return {med_fpg < med_rf && med_final >= 0.9 * v_star && t < 180.0,
            "median episodes to 0.8 v*: fpg(W=5)=" + fmt("%.0f", med_fpg) + " < reinforce=" + fmt("%.0f", med_rf) +
                ", offline median final v=" + fmt("%.4f", med_final) + " (>= " + fmt("%.4f", 0.9 * v_star) +
                "), time=" + fmt("%.1f", t) + "s (< 180s)"};
}

// 11. fit_model cost is linear in K and quadratic in d.
Outcome runtime_shape() {
    const int S = 12, A = 3, H = 5, m = 8;
    Rng rng = stream_rng(1111, 0);
    const MdpSpec mdp = random_mdp(S, A, H, 1111);
    const LinearSoftmaxPolicy pi(S, A, gaussian(rng, S * A, m), gaussian(rng, m, 0.3));
    const FeatureMap phi16 = FeatureMap::from_rows(S, A, gaussian(rng, S * A, 16));
    const FeatureMap phi32 = FeatureMap::from_rows(S, A, gaussian(rng, S * A, 32));
    const Dataset d4 = simulate(mdp, pi, 4000, 1);
    const Dataset d8 = simulate(mdp, pi, 8000, 2);
    auto time_fit = [&](const Dataset& data, const FeatureMap& phi) {
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 7; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            const FittedModel model = fit_model(data, pi, phi, kDefaultLambda);
            best = std::min(best, seconds_since(t0));
            if (model.horizon != H) return -1.0;
        }
        return best;
    };
    const double base = time_fit(d4, phi16);
    const double k_ratio = time_fit(d8, phi16) / base;
    const double d_ratio = time_fit(d4, phi32) / base;
    return {k_ratio >= 1.6 && k_ratio <= 2.6 && d_ratio >= 3.0 && d_ratio <= 5.5,
            "K-doubling ratio=" + fmt("%.2f", k_ratio) + " (in [1.6, 2.6]), d-doubling ratio=" + fmt("%.2f", d_ratio) +
                " (in [3, 5.5]), base=" + fmt("%.1f", base * 1e3) + "ms"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"prop2_equivalence", prop2_equivalence},
        {"oracle_gradient", oracle_gradient},
        {"certainty_equivalence", certainty_equivalence},
        {"consistency_rate", consistency_rate},
        {"shift_robustness", shift_robustness},
        {"asymptotic_normality", asymptotic_normality},
        {"is_unbiased", is_unbiased},
        {"discounted", discounted},
        {"bootstrap_coverage", bootstrap_coverage},
        {"optimization", optimization},
        {"runtime_shape", runtime_shape},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
