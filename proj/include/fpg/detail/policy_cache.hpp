#pragma once

#include <memory>
#include <vector>

#include "fpg/features.hpp"
#include "fpg/policy.hpp"

namespace fpg::detail {

/// Action integrals at a next state s' under pi_t(.|s'):
///   mean_phi  = sum_a' pi(a') phi(s', a')
///   score_phi = sum_a' pi(a') phi(s', a') score(s', a')^T   (support columns only)
struct NextStateStats {
    Vector prob;
    ParamRange range;
    Matrix score_block;  // actions x range.count
    Vector mean_phi;
    Matrix score_phi;    // d x range.count
};

/// Lazily filled per (step, state) table of NextStateStats.
class NextStateCache {
public:
    NextStateCache(const Policy& policy, const FeatureMap& phi) : policy_(policy), phi_(phi) {}

    const NextStateStats& get(int step, int state) {
        if (step >= static_cast<int>(table_.size())) table_.resize(step + 1);
        auto& row = table_[step];
        if (row.empty()) row.resize(phi_.n_states());
        auto& slot = row[state];
        if (!slot) slot = std::make_unique<NextStateStats>(compute(step, state));
        return *slot;
    }

private:
    NextStateStats compute(int step, int state) const {
        NextStateStats out;
        out.prob = policy_.prob(step, state);
        out.range = policy_.score_support(step, state);
        out.score_block = policy_.score_block(step, state);
        const int d = phi_.dim();
        out.mean_phi = Vector::Zero(d);
        out.score_phi = Matrix::Zero(d, out.range.count);
        for (int a = 0; a < phi_.n_actions(); ++a) {
            const double p = out.prob[a];
            if (p == 0.0) continue;
            const auto f = phi_.phi(state, a);
            for (int i : phi_.nonzeros(state, a)) {
                out.mean_phi[i] += p * f[i];
                out.score_phi.row(i) += (p * f[i]) * out.score_block.row(a);
            }
        }
        return out;
    }

    const Policy& policy_;
    const FeatureMap& phi_;
    std::vector<std::vector<std::unique_ptr<NextStateStats>>> table_;
};

}  // namespace fpg::detail
