#include "fpg/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace fpg {
namespace {

constexpr double kLogWeightCap = 700.0;

struct Accumulated {
    Vector grad;
    std::vector<double> weights;
    bool clamped = false;
};

void check_ids(const Step& st, const Policy& target) {
    if (st.s >= target.n_states() || st.a >= target.n_actions()) {
        throw ConfigError("dataset ids exceed the target policy's state/action counts");
    }
}

double log_ratio(const Policy& target, const ActionDistribution& behavior, int k, int h, const Step& st) {
    const double pb = behavior.prob(h, st.s)[st.a];
    if (!(pb > 0.0)) {
        throw InputError("behavior probability is zero for an observed action (k=" + std::to_string(k) +
                         ", h=" + std::to_string(h + 1) + ", s=" + std::to_string(st.s) + ", a=" +
                         std::to_string(st.a) + ")");
    }
    const double pt = target.prob(h, st.s)[st.a];
    return std::log(pt) - std::log(pb);
}

double capped_exp(double lw, bool& clamped) {
    if (lw > kLogWeightCap) {
        clamped = true;
        lw = kLogWeightCap;
    }
    return std::exp(lw);
}

WeightStats summarize(const std::vector<double>& w, bool clamped) {
    WeightStats out;
    out.clamped = clamped;
    if (w.empty()) return out;
    double sum = 0.0, sum_sq = 0.0;
    out.min = std::numeric_limits<double>::infinity();
    out.max = -std::numeric_limits<double>::infinity();
    for (double x : w) {
        sum += x;
        sum_sq += x * x;
        out.min = std::min(out.min, x);
        out.max = std::max(out.max, x);
    }
    out.mean = sum / static_cast<double>(w.size());
    out.ess = sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
    return out;
}

// behavior == nullptr means on-policy (all weights exactly 1).
Accumulated trajectory_is(const Dataset& data, const Policy& target, const ActionDistribution* behavior) {
    const int H = data.horizon(), m = target.n_params();
    Accumulated acc;
    acc.grad = Vector::Zero(m);
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& steps = data[k].steps;
        double lw = 0.0;
        Vector g = Vector::Zero(m);
        double to_go = 0.0;
        for (int h = H - 1; h >= 0; --h) {
            const Step& st = steps[h];
            check_ids(st, target);
            to_go += st.r;
            if (behavior) lw += log_ratio(target, *behavior, static_cast<int>(k), h, st);
            if (to_go != 0.0) {
                const ParamRange range = target.score_support(h, st.s);
                g.segment(range.first, range.count) += to_go * target.score_block(h, st.s).row(st.a).transpose();
            }
        }
        const double w = behavior ? capped_exp(lw, acc.clamped) : 1.0;
        acc.weights.push_back(w);
        acc.grad += w * g;
    }
    acc.grad /= static_cast<double>(data.size());
    return acc;
}

}  // namespace

ISEstimate is_estimate(const Dataset& data, const Policy& target, const ActionDistribution& behavior) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.size() == 0) throw InputError("is_estimate needs K >= 1 episodes");
    const Accumulated acc = trajectory_is(data, target, &behavior);
    ISEstimate out;
    out.estimate.grad = acc.grad;
    out.estimate.method = "is";
    out.estimate.episodes = data.size();
    out.estimate.seed = data.meta().seed;
    out.weights = summarize(acc.weights, acc.clamped);
    if (acc.clamped) out.estimate.warnings.push_back("importance weight overflow clamped at exp(700)");
    out.estimate.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

ISEstimate gpomdp_estimate(const Dataset& data, const Policy& target, const ActionDistribution& behavior) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.size() == 0) throw InputError("gpomdp_estimate needs K >= 1 episodes");
    const int H = data.horizon(), m = target.n_params();
    Vector grad = Vector::Zero(m);
    std::vector<double> weights;
    bool clamped = false;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& steps = data[k].steps;
        double lw = 0.0;
        Vector score_sum = Vector::Zero(m);
        for (int h = 0; h < H; ++h) {
            const Step& st = steps[h];
            check_ids(st, target);
            lw += log_ratio(target, behavior, static_cast<int>(k), h, st);
            const ParamRange range = target.score_support(h, st.s);
            score_sum.segment(range.first, range.count) += target.score_block(h, st.s).row(st.a).transpose();
            if (st.r != 0.0) grad += (capped_exp(lw, clamped) * st.r) * score_sum;
        }
        weights.push_back(capped_exp(lw, clamped));
    }
    ISEstimate out;
    out.estimate.grad = grad / static_cast<double>(data.size());
    out.estimate.method = "gpomdp";
    out.estimate.episodes = data.size();
    out.estimate.seed = data.meta().seed;
    out.weights = summarize(weights, clamped);
    if (clamped) out.estimate.warnings.push_back("importance weight overflow clamped at exp(700)");
    out.estimate.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

GradientEstimate on_policy_reinforce(const Dataset& data, const Policy& target) {
    const auto t0 = std::chrono::steady_clock::now();
    if (data.size() == 0) throw InputError("on_policy_reinforce needs K >= 1 episodes");
    GradientEstimate est;
    est.grad = trajectory_is(data, target, nullptr).grad;
    est.method = "reinforce";
    est.episodes = data.size();
    est.seed = data.meta().seed;
    est.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return est;
}

}  // namespace fpg
