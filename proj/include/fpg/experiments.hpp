#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fpg/features.hpp"
#include "fpg/fpg.hpp"
#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// (cos angle, relative error) of `est` against `exact`.
/// Throws DegenerateTargetError when exact is the zero vector.
std::pair<double, double> metric_cos_and_rel(const Vector& est, const Vector& exact);

struct MetricRow {
    std::string method;
    std::size_t K = 0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    double cos_angle = 0.0;
    double rel_err = 0.0;
    double mismatch_cond = 1.0;
    double chi2_F = 0.0;
    double wall_ms = 0.0;
};

/// fpg | model_based | is | gpomdp | reinforce. reinforce ignores the
/// behavior policy and treats the data as on-policy.
GradientEstimate run_method(const std::string& method, const Dataset& data, const Policy& target,
                            const ActionDistribution& behavior, const FeatureMap& phi, double lambda,
                            const Vector& xi);

/// Throws ConfigError for names run_method does not know.
void check_methods(const std::vector<std::string>& methods);

struct ShiftDiagnostics {
    double mismatch_cond = 1.0;  // pooled over steps
    double chi2_F = 0.0;         // +inf when the target leaves the data span
};

/// cond(Sigma_bar^{1/2} Sigma^{-1} Sigma_bar^{1/2}) with both covariances averaged
/// over steps, and the restricted chi-square divergence. Oracle quantities.
ShiftDiagnostics shift_diagnostics(const MdpSpec& mdp, const ActionDistribution& target,
                                   const ActionDistribution& behavior, const FeatureMap& phi);

struct SweepConfig {
    std::vector<std::size_t> episodes;        // K values
    std::vector<double> epsilons = {0.0};     // behavior = epsilon-greedy(target)
    std::vector<std::uint64_t> seeds = {0};
    std::vector<std::string> methods = {"fpg"};
    double lambda = kDefaultLambda;
};

/// One row per (epsilon, K, seed, method), sorted in that order. Cells run in
/// parallel; data for (epsilon, seed) comes from simulate(..., seed) so smaller
/// K are prefixes of larger ones.
std::vector<MetricRow> sweep(const MdpSpec& mdp, const Policy& target, const FeatureMap& phi,
                             const SweepConfig& config);

/// "# fpg-metrics v1" then method,K,epsilon,seed,cos_angle,rel_err,mismatch_cond,chi2_F,wall_ms.
void write_metrics_csv(const std::vector<MetricRow>& rows, std::ostream& out);

}  // namespace fpg
