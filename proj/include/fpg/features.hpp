#pragma once

#include <string>
#include <vector>

#include "fpg/common.hpp"
#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

class Dataset;

/// State-action feature map phi: S x A -> R^d over integer state/action ids.
/// Stored as a d x (S*A) table; column s * n_actions + a is phi(s, a).
class FeatureMap {
public:
    static FeatureMap one_hot(int n_states, int n_actions);
    /// `rows` has one row per (s, a) pair (row s * n_actions + a) and d columns.
    static FeatureMap from_rows(int n_states, int n_actions, const Matrix& rows);
    /// {"n_states": S, "n_actions": A, "rows": [[...], ...]}
    static FeatureMap from_json(const std::string& text);

    int dim() const { return static_cast<int>(table_.rows()); }
    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    bool is_one_hot() const { return one_hot_; }

    auto phi(int s, int a) const { return table_.col(index(s, a)); }
    const Matrix& table() const { return table_; }
    /// Indices of nonzero entries of phi(s, a).
    const std::vector<int>& nonzeros(int s, int a) const { return nonzeros_[index(s, a)]; }

    /// Whether the constant function lies in the span of the features (within 1e-8).
    bool constant_in_span() const;

    /// Throws ConfigError unless the map is defined on exactly these dimensions.
    void check_dims(int n_states, int n_actions) const;

private:
    FeatureMap(int n_states, int n_actions, Matrix table, bool one_hot);
    Eigen::Index index(int s, int a) const { return static_cast<Eigen::Index>(s) * n_actions_ + a; }

    int n_states_;
    int n_actions_;
    Matrix table_;
    bool one_hot_;
    std::vector<std::vector<int>> nonzeros_;
};

/// Solver for symmetric positive (semi)definite systems. Diagonal matrices are
/// solved by scaling; anything else goes through an LDLT factorization.
///
/// When `check_singular` is set, a reciprocal condition estimate below 1e-12
/// throws NumericalError naming `context` and the null direction.
class SpdSolver {
public:
    SpdSolver(const Matrix& a, bool check_singular, const std::string& context);

    Matrix solve(const Matrix& rhs) const;
    Vector solve(const Vector& rhs) const;
    bool diagonal() const { return diagonal_; }

private:
    bool diagonal_;
    Vector inv_diag_;
    Eigen::LDLT<Matrix> ldlt_;
};

/// Sigma_hat_h = (lambda I + sum_k phi phi^T) / K for each step h.
std::vector<Matrix> empirical_covariance(const Dataset& data, const FeatureMap& phi, double lambda);

/// sum_{s,a} mu(s,a) phi(s,a) phi(s,a)^T for one occupancy layer.
Matrix covariance_from_occupancy(const Matrix& mu, const FeatureMap& phi);
/// sum_{s,a} mu(s,a) phi(s,a).
Vector mean_from_occupancy(const Matrix& mu, const FeatureMap& phi);

/// Population covariance Sigma_h of the data distribution generated by `behavior`.
/// Oracle diagnostic: it needs the true MDP.
std::vector<Matrix> population_covariance(const MdpSpec& mdp, const ActionDistribution& behavior,
                                          const FeatureMap& phi);

/// Sigma_{theta,h} = E^{pi_theta}[phi phi^T].
std::vector<Matrix> target_covariance(const MdpSpec& mdp, const ActionDistribution& target,
                                      const FeatureMap& phi);

struct NuTheta {
    std::vector<Vector> nu;       // nu_h^theta, H layers
    std::vector<Matrix> grad_nu;  // d x m per layer
};

/// nu_h = E^{pi_theta}[phi(s_h, a_h)] and its theta-gradient through the
/// likelihood-ratio identity grad nu_h = E[phi(s_h,a_h) sum_{h'<=h} score_{h'}].
NuTheta nu_theta(const MdpSpec& mdp, const Policy& policy, const FeatureMap& phi);

/// grad_theta mu_h(s, a) for every layer: rows s * n_actions + a, m columns.
std::vector<Matrix> occupancy_gradient(const MdpSpec& mdp, const Policy& policy);

struct MismatchResult {
    double value = 1.0;               // +infinity when data misses a target direction
    bool pseudo_inverse_used = false;
};

/// cond(Sigma_target^{1/2} Sigma_data^{-1} Sigma_target^{1/2}), computed on the
/// support of Sigma_target. A singular Sigma_data is handled by pseudo-inverse
/// (flagged); if it fails to cover the target support the result is +infinity.
MismatchResult mismatch_condition_number(const Matrix& sigma_data, const Matrix& sigma_target);

/// max_h nu_{p1,h}^T Sigma_{p2,h}^+ nu_{p1,h} - 1 with occupancies p1 (target)
/// and p2 (behavior). Throws NumericalError naming h and the feature direction
/// when nu_{p1,h} has mass outside the range of Sigma_{p2,h}.
double chi2_restricted(const OccupancyMeasure& mu_target, const OccupancyMeasure& mu_behavior,
                       const FeatureMap& phi);

/// max over h and (s, a) of phi^T Sigma_h^{-1} phi (the C_1 d diagnostic).
double max_leverage(const std::vector<Matrix>& sigma, const FeatureMap& phi);

}  // namespace fpg
