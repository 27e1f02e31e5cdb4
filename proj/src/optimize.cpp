#include "fpg/optimize.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <ostream>

#include "fpg/baselines.hpp"

namespace fpg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDivergence = 1e6;

// Comparison to the exact gradient. NaN where undefined (zero norms).
void score_estimate(TraceRow& row, const Vector& est, const Vector& exact) {
    row.grad_norm = est.norm();
    const double ne = exact.norm();
    row.rel_err = ne > 0.0 ? (est - exact).norm() / ne : kNaN;
    row.cos_angle = ne > 0.0 && row.grad_norm > 0.0 ? est.dot(exact) / (ne * row.grad_norm) : kNaN;
}

TraceRow evaluate(const MdpSpec& mdp, const Policy& policy, int iter, std::size_t episodes) {
    TraceRow row;
    row.iter = iter;
    row.value = exact_q_and_value(mdp, policy).v;
    row.episodes = episodes;
    row.theta_hash = theta_hash(policy.params());
    row.cos_angle = row.rel_err = row.grad_norm = kNaN;
    return row;
}

Vector empirical_start(const Dataset& data, int n_states) {
    Vector xi = Vector::Zero(n_states);
    for (const Episode& ep : data.episodes()) xi[ep.steps.front().s] += 1.0;
    return xi / static_cast<double>(data.size());
}

// Shared loop: `estimate(policy, iter, consumed)` returns the gradient estimate
// and adds any freshly sampled episodes to `consumed`.
template <typename Estimate>
OptimizationTrace run(const MdpSpec& mdp, const Policy& init, double step, int iters, Estimate&& estimate) {
    OptimizationTrace trace;
    std::unique_ptr<Policy> policy = init.with_params(init.params());
    std::size_t consumed = 0;
    for (int i = 0;; ++i) {
        TraceRow row = evaluate(mdp, *policy, i, consumed);
        if (i == iters) {
            trace.rows.push_back(row);
            break;
        }
        const Vector grad = estimate(*policy, i, consumed);
        score_estimate(row, grad, exact_policy_gradient(mdp, *policy));
        trace.rows.push_back(row);
        const Vector theta = policy->params() + step * grad;
        if (!theta.allFinite() || theta.norm() > kDivergence) {
            trace.diverged = true;
            trace.diagnostic = "||theta|| exceeded 1e6 after iteration " + std::to_string(i) + " (step " +
                               std::to_string(step) + "); stopped";
            break;
        }
        policy = policy->with_params(theta);
    }
    trace.final_theta = policy->params();
    return trace;
}

}  // namespace

std::size_t OptimizationTrace::episodes_to_reach(double threshold) const {
    for (const TraceRow& row : rows) {
        if (row.value >= threshold) return row.episodes;
    }
    return std::numeric_limits<std::size_t>::max();
}

void AscendConfig::validate() const {
    if (estimator != "fpg" && estimator != "reinforce") {
        throw ConfigError("unknown estimator '" + estimator + "' (expected fpg or reinforce)");
    }
    if (!(step >= 0.0)) throw InputError("step size must be >= 0");
    if (iters < 0) throw InputError("iters must be >= 0");
    if (episodes_per_iter == 0) throw InputError("episodes per iteration must be >= 1");
    if (window < 1) throw InputError("window W must be >= 1");
    if (!(lambda >= 0.0)) throw InputError("ridge parameter lambda must be >= 0");
}

OptimizationTrace ascend(const MdpSpec& mdp, const Policy& init, const FeatureMap& phi, const AscendConfig& config) {
    config.validate();
    check_dims(mdp, init);
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    std::deque<Dataset> window;
    return run(mdp, init, config.step, config.iters, [&](const Policy& policy, int i, std::size_t& consumed) {
        Dataset fresh = simulate(mdp, policy, config.episodes_per_iter, mix64(config.seed) ^ static_cast<std::uint64_t>(i));
        consumed += fresh.size();
        if (config.estimator == "reinforce") return Vector(on_policy_reinforce(fresh, policy).grad);
        window.push_back(std::move(fresh));
        while (static_cast<int>(window.size()) > config.window) window.pop_front();
        std::vector<const Dataset*> parts;
        for (const Dataset& d : window) parts.push_back(&d);
        return Vector(fpg_estimate(concat(parts), policy, phi, config.lambda, mdp.initial_dist()).grad);
    });
}

OptimizationTrace offline_ascend(const MdpSpec& mdp, const Dataset& data, const Policy& init, const FeatureMap& phi,
                                 double step, int iters, double lambda) {
    if (!(step >= 0.0)) throw InputError("step size must be >= 0");
    if (iters < 0) throw InputError("iters must be >= 0");
    if (data.size() == 0) throw InputError("offline_ascend needs K >= 1 episodes");
    check_dims(mdp, init);
    const Vector xi = empirical_start(data, mdp.n_states());
    return run(mdp, init, step, iters, [&](const Policy& policy, int, std::size_t& consumed) {
        consumed = data.size();
        return Vector(fpg_estimate(data, policy, phi, lambda, xi).grad);
    });
}

void write_trace_csv(const OptimizationTrace& trace, std::ostream& out) {
    out << "# fpg-trace v1\n";
    out << "iter,value,cos_angle,rel_err,episodes,grad_norm,theta_hash\n";
    const auto old = out.precision(17);
    for (const TraceRow& r : trace.rows) {
        out << r.iter << ',' << r.value << ',' << r.cos_angle << ',' << r.rel_err << ',' << r.episodes << ','
            << r.grad_norm << ',' << hex64(r.theta_hash) << '\n';
    }
    out.precision(old);
}

}  // namespace fpg
