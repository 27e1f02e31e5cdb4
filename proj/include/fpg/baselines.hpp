#pragma once

#include "fpg/dataset.hpp"
#include "fpg/fpg.hpp"
#include "fpg/policy.hpp"

namespace fpg {

struct WeightStats {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    double ess = 0.0;   // (sum w)^2 / sum w^2
    bool clamped = false;  // some log-weight exceeded 700 and was clamped
};

struct ISEstimate {
    GradientEstimate estimate;
    WeightStats weights;
};

/// Trajectory-level importance sampling:
///   (1/K) sum_k w_k sum_h (sum_{h'>=h} r_h') score(a_h | s_h),  w_k = prod_h pi / pi_bar.
/// Throws InputError naming (k, h, s, a) if the behavior gives an observed action
/// zero probability.
ISEstimate is_estimate(const Dataset& data, const Policy& target, const ActionDistribution& behavior);

/// Per-decision variant: (1/K) sum_k sum_h w_{k,h} r_h sum_{h'<=h} score_{h'},
/// with w_{k,h} = prod_{h'<=h} pi / pi_bar. Weight stats describe the full-length products.
ISEstimate gpomdp_estimate(const Dataset& data, const Policy& target, const ActionDistribution& behavior);

/// Plain Monte-Carlo REINFORCE with reward-to-go on data drawn from the target.
GradientEstimate on_policy_reinforce(const Dataset& data, const Policy& target);

}  // namespace fpg
