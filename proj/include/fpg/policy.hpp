#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fpg/common.hpp"

namespace fpg {

/// Numerically stable softmax (max-subtracted). Throws InputError on NaN logits.
Vector softmax(const Vector& logits);

/// Anything that assigns action probabilities to (h, s). Behavior policies only
/// need this much; estimators that require a score take a Policy instead.
class ActionDistribution {
public:
    virtual ~ActionDistribution() = default;

    virtual int n_states() const = 0;
    virtual int n_actions() const = 0;

    /// Probability vector over actions at step h (0-based) in state s.
    virtual Vector prob(int h, int s) const = 0;

    virtual std::string describe() const = 0;

    /// Inverse-cdf draw from prob(h, s).
    int sample_action(int h, int s, Rng& rng) const;
};

/// Contiguous block of parameter indices.
struct ParamRange {
    int first = 0;
    int count = 0;
};

/// Differentiable stochastic policy pi_theta. Stationary implementations ignore h.
class Policy : public ActionDistribution {
public:
    virtual int n_params() const = 0;
    virtual const Vector& params() const = 0;

    /// grad_theta log pi_h(a | s), an m-vector.
    virtual Vector score(int h, int s, int a) const = 0;

    /// Parameters outside this range have zero score at (h, s) for every action.
    virtual ParamRange score_support(int h, int s) const;

    /// Scores restricted to score_support(h, s): rows are actions, columns are
    /// the parameters of the support range.
    virtual Matrix score_block(int h, int s) const;

    /// Sup-norm bound G on score components.
    virtual double score_bound() const = 0;

    virtual std::unique_ptr<Policy> with_params(const Vector& theta) const = 0;
};

/// Softmax over a logit table theta[s][a], flattened as s * n_actions + a.
class SoftmaxTabularPolicy final : public Policy {
public:
    SoftmaxTabularPolicy(int n_states, int n_actions, Vector theta);
    SoftmaxTabularPolicy(int n_states, int n_actions);  // all-zero logits

    int n_states() const override { return n_states_; }
    int n_actions() const override { return n_actions_; }
    Vector prob(int h, int s) const override;
    std::string describe() const override;

    int n_params() const override { return static_cast<int>(theta_.size()); }
    const Vector& params() const override { return theta_; }
    Vector score(int h, int s, int a) const override;
    ParamRange score_support(int h, int s) const override;
    Matrix score_block(int h, int s) const override;
    double score_bound() const override { return 1.0; }
    std::unique_ptr<Policy> with_params(const Vector& theta) const override;

private:
    int n_states_;
    int n_actions_;
    Vector theta_;
    Matrix probs_;  // n_actions x n_states, cached
};

/// Softmax of theta^T psi(s, a) over arbitrary (state, action) features psi.
/// `psi` has one row per (s, a) pair (row s * n_actions + a) and m columns.
class LinearSoftmaxPolicy final : public Policy {
public:
    LinearSoftmaxPolicy(int n_states, int n_actions, Matrix psi, Vector theta);

    int n_states() const override { return n_states_; }
    int n_actions() const override { return n_actions_; }
    Vector prob(int h, int s) const override;
    std::string describe() const override;

    int n_params() const override { return static_cast<int>(theta_.size()); }
    const Vector& params() const override { return theta_; }
    Vector score(int h, int s, int a) const override;
    Matrix score_block(int h, int s) const override;
    double score_bound() const override;
    std::unique_ptr<Policy> with_params(const Vector& theta) const override;

    const Matrix& psi() const { return psi_; }

private:
    int n_states_;
    int n_actions_;
    Matrix psi_;
    Vector theta_;
    Matrix probs_;
};

/// Fixed action per state.
class DeterministicPolicy final : public ActionDistribution {
public:
    DeterministicPolicy(int n_actions, std::vector<int> actions);

    int n_states() const override { return static_cast<int>(actions_.size()); }
    int n_actions() const override { return n_actions_; }
    Vector prob(int h, int s) const override;
    std::string describe() const override;

private:
    int n_actions_;
    std::vector<int> actions_;
};

/// (1 - epsilon) * base + epsilon * uniform. Sampling only: it has no score, so it
/// cannot be passed where a Policy is required.
class EpsilonGreedyWrapper final : public ActionDistribution {
public:
    EpsilonGreedyWrapper(std::shared_ptr<const ActionDistribution> base, double epsilon);

    int n_states() const override { return base_->n_states(); }
    int n_actions() const override { return base_->n_actions(); }
    Vector prob(int h, int s) const override;
    std::string describe() const override;
    double epsilon() const { return epsilon_; }

private:
    std::shared_ptr<const ActionDistribution> base_;
    double epsilon_;
};

/// Non-owning view of a Policy as a shared ActionDistribution (for wrappers that
/// must not outlive the caller's policy).
std::shared_ptr<const ActionDistribution> borrow(const ActionDistribution& dist);

// theta is exchanged as {"shape": [...], "theta": [flat values]}.
std::string theta_to_json(const Vector& theta, const std::vector<int>& shape);
Vector theta_from_json(const std::string& text, std::vector<int>* shape = nullptr);

/// Hash of the exact bit pattern of theta.
std::uint64_t theta_hash(const Vector& theta);

}  // namespace fpg
