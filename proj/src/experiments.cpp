#include "fpg/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <ostream>

#include "fpg/baselines.hpp"
#include "fpg/dataset.hpp"

namespace fpg {
namespace {

const std::vector<std::string> kMethods = {"fpg", "model_based", "is", "gpomdp", "reinforce"};

Matrix pooled(const std::vector<Matrix>& layers) {
    Matrix out = Matrix::Zero(layers.front().rows(), layers.front().cols());
    for (const Matrix& m : layers) out += m;
    return out / static_cast<double>(layers.size());
}

}  // namespace

std::pair<double, double> metric_cos_and_rel(const Vector& est, const Vector& exact) {
    if (est.size() != exact.size()) throw ConfigError("metric: estimate and exact gradient differ in length");
    const double ne = exact.norm();
    if (!(ne > 0.0)) throw DegenerateTargetError("exact gradient is zero; cos angle and relative error are undefined");
    const double ns = est.norm();
    const double cos = ns > 0.0 ? std::clamp(est.dot(exact) / (ns * ne), -1.0, 1.0) : 0.0;
    return {cos, (est - exact).norm() / ne};
}

void check_methods(const std::vector<std::string>& methods) {
    for (const std::string& m : methods) {
        if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
            throw ConfigError("unknown method '" + m + "' (expected fpg, model_based, is, gpomdp or reinforce)");
        }
    }
}

GradientEstimate run_method(const std::string& method, const Dataset& data, const Policy& target,
                            const ActionDistribution& behavior, const FeatureMap& phi, double lambda,
                            const Vector& xi) {
    if (method == "fpg") return fpg_estimate(data, target, phi, lambda, xi);
    if (method == "model_based") return model_based_estimate(data, target, phi, lambda, xi);
    if (method == "is") return is_estimate(data, target, behavior).estimate;
    if (method == "gpomdp") return gpomdp_estimate(data, target, behavior).estimate;
    if (method == "reinforce") return on_policy_reinforce(data, target);
    check_methods({method});
    return {};
}

ShiftDiagnostics shift_diagnostics(const MdpSpec& mdp, const ActionDistribution& target,
                                   const ActionDistribution& behavior, const FeatureMap& phi) {
    ShiftDiagnostics out;
    out.mismatch_cond = mismatch_condition_number(pooled(population_covariance(mdp, behavior, phi)),
                                                  pooled(target_covariance(mdp, target, phi)))
                            .value;
    try {
        out.chi2_F = chi2_restricted(occupancy(mdp, target), occupancy(mdp, behavior), phi);
    } catch (const NumericalError&) {
        out.chi2_F = std::numeric_limits<double>::infinity();
    }
    return out;
}

std::vector<MetricRow> sweep(const MdpSpec& mdp, const Policy& target, const FeatureMap& phi,
                             const SweepConfig& config) {
    check_methods(config.methods);
    check_dims(mdp, target);
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    if (config.episodes.empty()) throw ConfigError("sweep needs at least one K");
    for (std::size_t K : config.episodes) {
        if (K == 0) throw InputError("K must be >= 1");
    }
    for (double e : config.epsilons) {
        if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
    }
    const Vector exact = exact_policy_gradient(mdp, target);
    if (!(exact.norm() > 0.0)) {
        throw DegenerateTargetError("exact gradient is zero; cos angle and relative error are undefined");
    }
    const std::size_t k_max = *std::max_element(config.episodes.begin(), config.episodes.end());

    const std::size_t nE = config.epsilons.size(), nS = config.seeds.size();
    std::vector<std::shared_ptr<EpsilonGreedyWrapper>> behaviors;
    std::vector<ShiftDiagnostics> diag;
    for (double e : config.epsilons) {
        behaviors.push_back(std::make_shared<EpsilonGreedyWrapper>(borrow(target), e));
        diag.push_back(shift_diagnostics(mdp, target, *behaviors.back(), phi));
    }

    // One dataset per (epsilon, seed); every K is a prefix of it.
    std::vector<std::unique_ptr<Dataset>> full(nE * nS);
    parallel_for(nE * nS, [&](std::size_t i) {
        full[i] = std::make_unique<Dataset>(simulate(mdp, *behaviors[i / nS], k_max, config.seeds[i % nS]));
    });

    const std::size_t nK = config.episodes.size(), nM = config.methods.size();
    std::vector<MetricRow> rows(nE * nK * nS * nM);
    parallel_for(rows.size(), [&](std::size_t i) {
        const std::size_t mi = i % nM, si = (i / nM) % nS, ki = (i / (nM * nS)) % nK, ei = i / (nM * nS * nK);
        const std::size_t K = config.episodes[ki];
        std::vector<std::size_t> prefix(K);
        for (std::size_t k = 0; k < K; ++k) prefix[k] = k;
        const Dataset data = full[ei * nS + si]->resample(prefix);
        const GradientEstimate est =
            run_method(config.methods[mi], data, target, *behaviors[ei], phi, config.lambda, mdp.initial_dist());
        MetricRow& row = rows[i];
        row.method = config.methods[mi];
        row.K = K;
        row.epsilon = config.epsilons[ei];
        row.seed = config.seeds[si];
        std::tie(row.cos_angle, row.rel_err) = metric_cos_and_rel(est.grad, exact);
        row.mismatch_cond = diag[ei].mismatch_cond;
        row.chi2_F = diag[ei].chi2_F;
        row.wall_ms = est.wall_ms;
    });
    return rows;
}

void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out) {
    out << "# fpg-metrics v1\n";
    out << "method,K,epsilon,seed,cos_angle,rel_err,mismatch_cond,chi2_F,wall_ms\n";
    const auto old = out.precision(12);
    for (const MetricRow& r : rows) {
        out << r.method << ',' << r.K << ',' << r.epsilon << ',' << r.seed << ',' << r.cos_angle << ','
            << r.rel_err << ',' << r.mismatch_cond << ',' << r.chi2_F << ',' << r.wall_ms << '\n';
    }
    out.precision(old);
}

}  // namespace fpg
