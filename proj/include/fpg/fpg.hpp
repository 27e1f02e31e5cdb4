#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpg/common.hpp"
#include "fpg/dataset.hpp"
#include "fpg/features.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// Per-step regression quantities of the linear FPG estimator:
///
///   w_r[h]      = Sigma_h^{-1} (1/K) sum_k phi_k r_k
///   M[h]        = Sigma_h^{-1} (1/K) sum_k phi_k E_{a'~pi}[phi(s'_k, a')]^T
///   grad_M[h][j]= Sigma_h^{-1} (1/K) sum_k phi_k E_{a'~pi}[score_j(s'_k, a') phi(s'_k, a')]^T
///
/// with Sigma_h = (lambda I + sum_k phi_k phi_k^T) / K. The d x (m d) Kronecker
/// slab of the matrix form is stored as m separate d x d blocks, so
/// grad_M * (I_m kron w) has column j equal to grad_M[h][j] * w.
struct FittedModel {
    int horizon = 0;
    int dim = 0;
    int n_params = 0;
    std::vector<Vector> w_r;
    std::vector<Matrix> M;
    std::vector<std::vector<Matrix>> grad_M;
};

/// Q_h(s,a) = phi^T w[h], grad Q_h(s,a) = phi^T W[h]. Layer H is all zero.
struct FittedValues {
    std::vector<Vector> w;  // H + 1 layers
    std::vector<Matrix> W;  // H + 1 layers, d x m
};

struct GradientEstimate {
    Vector grad;
    std::string method;
    std::size_t episodes = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::vector<std::string> warnings;
};

/// Builds w_r, M, and grad_M for every step. Each Sigma_h is factorized once and
/// reused for all right-hand sides.
///
/// Throws InputError for lambda < 0 and NumericalError when lambda == 0 and some
/// Sigma_h is singular (the message names h and the null direction).
FittedModel fit_model(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda);

/// Backward recursion w_h = w_r + M w_{h+1}, W_h = grad_M (I kron w_{h+1}) + M W_{h+1}.
FittedValues fpg_recursion(const FittedModel& model);

/// sum_s xi(s) sum_a pi_1(a|s) (phi^T W_1 + (phi^T w_1) score^T).
Vector initial_gradient(const Vector& w1, const Matrix& W1, const Policy& target, const FeatureMap& phi,
                        const Vector& xi);

/// Linear FPG estimate of grad v_theta. Flags (does not throw) fitted Q values
/// beyond 2H, which indicate heavy extrapolation.
GradientEstimate fpg_estimate(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda,
                              const Vector& xi);

/// Model-based plug-in route: regression operators r_hat and P_hat_theta are
/// applied to function tables over S x A, and the policy-gradient Bellman
/// recursion is run on the tables. Algebraically equal to fpg_estimate.
GradientEstimate model_based_estimate(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                      double lambda, const Vector& xi);

/// Default ridge used by the CLI and optimization loops.
inline constexpr double kDefaultLambda = 1e-6;

}  // namespace fpg
