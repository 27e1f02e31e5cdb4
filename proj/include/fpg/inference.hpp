#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fpg/dataset.hpp"
#include "fpg/features.hpp"
#include "fpg/fpg.hpp"
#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// Linear weights of Q_h and grad Q_h (same layout as FittedValues).
using QWeights = FittedValues;

/// Least-squares projection of the exact Q_h and grad Q_h tables onto the
/// feature span. Exact when the features realize Q (always for one-hot).
QWeights oracle_q_weights(const MdpSpec& mdp, const Policy& target, const FeatureMap& phi);

struct Residuals {
    Matrix eps;                          // H x K: eps_{h,k}
    std::vector<std::vector<Vector>> grad_eps;  // [h][k] m-vectors
};

/// eps_{h,k} = Q_h(s,a) - r - E_{a'~pi}[Q_{h+1}(s', a')] and its theta-gradient
///   grad eps = grad Q_h(s,a) - E_{a'~pi}[score(s',a') Q_{h+1}(s',a') + grad Q_{h+1}(s',a')].
Residuals residuals(const Dataset& data, const Policy& target, const FeatureMap& phi, const QWeights& q);

struct CovarianceEstimate {
    Matrix lambda_hat;  // m x m
    /// influence[h] is K x m: row k is grad(eps_{h,k} phi_k^T Sigma_h^{-1} nu_h).
    std::vector<Matrix> influence;
};

/// Lambda_hat = sum_h sample-Cov_k of the per-episode influence vectors
///   grad eps_{h,k} (phi_k^T Sigma_h^{-1} nu_h) + eps_{h,k} (phi_k^T Sigma_h^{-1} grad nu_h).
/// `sigma` supplies Sigma_h per step. Throws InputError when K < 2.
CovarianceEstimate lambda_hat(const Dataset& data, const Policy& target, const FeatureMap& phi,
                              const NuTheta& nu, const QWeights& q, const std::vector<Matrix>& sigma);

/// nu_h and grad nu_h propagated through the fitted model:
///   nu_1 = sum xi pi phi, nu_{h+1} = M_h^T nu_h,
///   grad_j nu_{h+1} = M_h^T grad_j nu_h + grad_M[h][j]^T nu_h.
NuTheta fitted_nu(const FittedModel& model, const Policy& target, const FeatureMap& phi, const Vector& xi);

/// Plug-in covariance from data alone: fitted w, W, nu_hat, and Sigma_hat.
CovarianceEstimate plugin_lambda_hat(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                     double lambda, const Vector& xi);

/// Oracle covariance: exact Q weights, exact nu, population Sigma_h of `behavior`,
/// evaluated on the given data.
CovarianceEstimate oracle_lambda_hat(const Dataset& data, const MdpSpec& mdp, const Policy& target,
                                     const ActionDistribution& behavior, const FeatureMap& phi);

struct BoundReport {
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double kappa3 = 0.0;
    Vector b_theta;       // per parameter j
    double chi2_F = 0.0;
    double C1d_max = 0.0;
    double C_theta = 0.0;  // informational; +inf when Sigma_{theta,1} is singular
    Vector nu_norm;        // ||Sigma_h^{-1/2} nu_h|| per step
};

/// Diagnostic constants of the finite-sample bounds, from oracle quantities.
/// At the last step the terms that involve step H+1 are dropped. Throws
/// NumericalError naming h when a behavior covariance Sigma_h is singular.
BoundReport bound_report(const MdpSpec& mdp, const Policy& target, const ActionDistribution& behavior,
                         const FeatureMap& phi);

/// Reward-free bound 4 b_theta_j sqrt(min{C1d, H} log(8m/delta) / K) (leading term).
Vector reward_free_bound(const BoundReport& report, int horizon, int n_params, std::size_t episodes,
                         double delta);

struct BootstrapConfig {
    double lambda = kDefaultLambda;
    Vector xi;
};

/// Runs FPG on data.resample(indices).
GradientEstimate estimate_on_resample(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                      const BootstrapConfig& config, const std::vector<std::size_t>& indices);

/// B episode-level bootstrap replicates (K draws with replacement each).
/// Replicate b draws from stream_rng(seed, b). Returns a B x m matrix.
Matrix bootstrap(const Dataset& data, const Policy& target, const FeatureMap& phi, const BootstrapConfig& config,
                 std::size_t replicates, std::uint64_t seed);

/// Per-column percentile interval [q_lo, q_hi] with linear interpolation.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};
std::vector<Interval> percentile_intervals(const Matrix& samples, double level);

}  // namespace fpg
