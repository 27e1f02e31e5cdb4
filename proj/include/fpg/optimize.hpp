#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fpg/dataset.hpp"
#include "fpg/features.hpp"
#include "fpg/fpg.hpp"
#include "fpg/mdp.hpp"
#include "fpg/policy.hpp"

namespace fpg {

/// Row i describes theta_i: its exact value, the estimate taken there, and the
/// number of episodes consumed to reach it. The last row (i = iters, or the
/// divergence point) has no estimate; its gradient columns are NaN.
struct TraceRow {
    int iter = 0;
    double value = 0.0;
    double cos_angle = 0.0;
    double rel_err = 0.0;
    std::size_t episodes = 0;
    double grad_norm = 0.0;
    std::uint64_t theta_hash = 0;
};

struct OptimizationTrace {
    std::vector<TraceRow> rows;
    Vector final_theta;
    bool diverged = false;
    std::string diagnostic;

    /// Episodes consumed when the exact value first reaches `threshold`;
    /// std::nullopt-like sentinel SIZE_MAX when never reached.
    std::size_t episodes_to_reach(double threshold) const;
};

struct AscendConfig {
    std::string estimator = "fpg";  // fpg | reinforce
    double step = 0.5;
    int iters = 100;
    std::size_t episodes_per_iter = 10;
    int window = 5;                 // fpg only: pools the last W iterations' data
    double lambda = kDefaultLambda;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Online ascent theta <- theta + step * grad_hat. Iteration i samples fresh
/// episodes under pi_{theta_i} from stream seed (seed, i). Stops early when
/// ||theta|| exceeds 1e6.
OptimizationTrace ascend(const MdpSpec& mdp, const Policy& init, const FeatureMap& phi, const AscendConfig& config);

/// Ascent with every gradient estimated by FPG from the same fixed dataset.
/// The start distribution is the empirical one of the data's first states; the
/// MDP is used only to record exact values in the trace.
OptimizationTrace offline_ascend(const MdpSpec& mdp, const Dataset& data, const Policy& init, const FeatureMap& phi,
                                 double step, int iters, double lambda = kDefaultLambda);

/// "# fpg-trace v1" then iter,value,cos_angle,rel_err,episodes,grad_norm,theta_hash.
void write_trace_csv(const OptimizationTrace& trace, std::ostream& out);

}  // namespace fpg
