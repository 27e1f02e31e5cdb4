#include "fpg/policy.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <json.hpp>

namespace fpg {

Vector softmax(const Vector& logits) {
    if (logits.size() == 0) throw InputError("softmax of an empty logit vector");
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (std::isnan(logits[i])) throw InputError("NaN logit at index " + std::to_string(i));
    }
    const double top = logits.maxCoeff();
    if (!std::isfinite(top)) throw InputError("non-finite logits");
    Vector e = (logits.array() - top).exp().matrix();
    return e / e.sum();
}

int ActionDistribution::sample_action(int h, int s, Rng& rng) const {
    const Vector p = prob(h, s);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    double acc = 0.0;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
        acc += p[a];
        if (u < acc) return static_cast<int>(a);
    }
    // u landed in the rounding gap above the cumulative sum: last action with mass.
    for (Eigen::Index a = p.size() - 1; a >= 0; --a) {
        if (p[a] > 0.0) return static_cast<int>(a);
    }
    return static_cast<int>(p.size() - 1);
}

ParamRange Policy::score_support(int, int) const { return {0, n_params()}; }

Matrix Policy::score_block(int h, int s) const {
    const ParamRange range = score_support(h, s);
    Matrix block(n_actions(), range.count);
    for (int a = 0; a < n_actions(); ++a) {
        block.row(a) = score(h, s, a).segment(range.first, range.count).transpose();
    }
    return block;
}

// ---------------------------------------------------------------------------

SoftmaxTabularPolicy::SoftmaxTabularPolicy(int n_states, int n_actions, Vector theta)
    : n_states_(n_states), n_actions_(n_actions), theta_(std::move(theta)) {
    if (n_states <= 0 || n_actions <= 0) throw ConfigError("policy needs positive state/action counts");
    if (theta_.size() != static_cast<Eigen::Index>(n_states) * n_actions) {
        throw ConfigError("tabular softmax expects " + std::to_string(n_states * n_actions) +
                          " logits, got " + std::to_string(theta_.size()));
    }
    probs_.resize(n_actions_, n_states_);
    for (int s = 0; s < n_states_; ++s) {
        probs_.col(s) = softmax(theta_.segment(static_cast<Eigen::Index>(s) * n_actions_, n_actions_));
    }
}

SoftmaxTabularPolicy::SoftmaxTabularPolicy(int n_states, int n_actions)
    : SoftmaxTabularPolicy(n_states, n_actions,
                           Vector::Zero(static_cast<Eigen::Index>(n_states) * n_actions)) {}

Vector SoftmaxTabularPolicy::prob(int, int s) const { return probs_.col(s); }

std::string SoftmaxTabularPolicy::describe() const {
    return "softmax_tabular(" + std::to_string(n_states_) + "x" + std::to_string(n_actions_) + ")";
}

Vector SoftmaxTabularPolicy::score(int, int s, int a) const {
    if (a < 0 || a >= n_actions_) throw InputError("action " + std::to_string(a) + " out of range");
    if (s < 0 || s >= n_states_) throw InputError("state " + std::to_string(s) + " out of range");
    Vector g = Vector::Zero(theta_.size());
    auto seg = g.segment(static_cast<Eigen::Index>(s) * n_actions_, n_actions_);
    seg = -probs_.col(s);
    seg[a] += 1.0;
    return g;
}

ParamRange SoftmaxTabularPolicy::score_support(int, int s) const {
    return {s * n_actions_, n_actions_};
}

Matrix SoftmaxTabularPolicy::score_block(int, int s) const {
    // row a: e_a - pi(.|s)
    Matrix block = -probs_.col(s).transpose().replicate(n_actions_, 1);
    block.diagonal().array() += 1.0;
    return block;
}

std::unique_ptr<Policy> SoftmaxTabularPolicy::with_params(const Vector& theta) const {
    return std::make_unique<SoftmaxTabularPolicy>(n_states_, n_actions_, theta);
}

// ---------------------------------------------------------------------------

LinearSoftmaxPolicy::LinearSoftmaxPolicy(int n_states, int n_actions, Matrix psi, Vector theta)
    : n_states_(n_states), n_actions_(n_actions), psi_(std::move(psi)), theta_(std::move(theta)) {
    if (psi_.rows() != static_cast<Eigen::Index>(n_states) * n_actions) {
        throw ConfigError("policy feature table needs one row per (state, action)");
    }
    if (psi_.cols() != theta_.size()) throw ConfigError("policy feature width differs from theta size");
    probs_.resize(n_actions_, n_states_);
    for (int s = 0; s < n_states_; ++s) {
        probs_.col(s) = softmax(psi_.middleRows(static_cast<Eigen::Index>(s) * n_actions_, n_actions_) * theta_);
    }
}

Vector LinearSoftmaxPolicy::prob(int, int s) const { return probs_.col(s); }

std::string LinearSoftmaxPolicy::describe() const {
    return "linear_softmax(m=" + std::to_string(theta_.size()) + ")";
}

Vector LinearSoftmaxPolicy::score(int h, int s, int a) const {
    if (a < 0 || a >= n_actions_) throw InputError("action " + std::to_string(a) + " out of range");
    return score_block(h, s).row(a).transpose();
}

Matrix LinearSoftmaxPolicy::score_block(int, int s) const {
    auto rows = psi_.middleRows(static_cast<Eigen::Index>(s) * n_actions_, n_actions_);
    const Eigen::RowVectorXd mean = probs_.col(s).transpose() * rows;
    return rows.rowwise() - mean;
}

double LinearSoftmaxPolicy::score_bound() const {
    // |psi_j(s,a) - E_pi psi_j(s,.)| <= max_a psi_j - min_a psi_j
    double bound = 0.0;
    for (int s = 0; s < n_states_; ++s) {
        auto rows = psi_.middleRows(static_cast<Eigen::Index>(s) * n_actions_, n_actions_);
        bound = std::max(bound, (rows.colwise().maxCoeff() - rows.colwise().minCoeff()).maxCoeff());
    }
    return bound;
}

std::unique_ptr<Policy> LinearSoftmaxPolicy::with_params(const Vector& theta) const {
    return std::make_unique<LinearSoftmaxPolicy>(n_states_, n_actions_, psi_, theta);
}

// ---------------------------------------------------------------------------

DeterministicPolicy::DeterministicPolicy(int n_actions, std::vector<int> actions)
    : n_actions_(n_actions), actions_(std::move(actions)) {
    for (int a : actions_) {
        if (a < 0 || a >= n_actions_) throw ConfigError("deterministic action out of range");
    }
}

Vector DeterministicPolicy::prob(int, int s) const {
    Vector p = Vector::Zero(n_actions_);
    p[actions_.at(s)] = 1.0;
    return p;
}

std::string DeterministicPolicy::describe() const { return "deterministic"; }

EpsilonGreedyWrapper::EpsilonGreedyWrapper(std::shared_ptr<const ActionDistribution> base,
                                           double epsilon)
    : base_(std::move(base)), epsilon_(epsilon) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0, 1]");
}

Vector EpsilonGreedyWrapper::prob(int h, int s) const {
    const double uniform = epsilon_ / base_->n_actions();
    return ((1.0 - epsilon_) * base_->prob(h, s).array() + uniform).matrix();
}

std::string EpsilonGreedyWrapper::describe() const {
    std::ostringstream out;
    out << "epsilon_greedy(" << epsilon_ << ", " << base_->describe() << ")";
    return out.str();
}

std::shared_ptr<const ActionDistribution> borrow(const ActionDistribution& dist) {
    return std::shared_ptr<const ActionDistribution>(&dist, [](const ActionDistribution*) {});
}

// ---------------------------------------------------------------------------

std::string theta_to_json(const Vector& theta, const std::vector<int>& shape) {
    nlohmann::json doc;
    doc["shape"] = shape;
    doc["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    return doc.dump();
}

Vector theta_from_json(const std::string& text, std::vector<int>* shape) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("theta: ") + e.what(), 0);
    }
    if (!doc.contains("theta") || !doc["theta"].is_array()) throw ParseError("theta: missing \"theta\" array", 0);
    std::vector<double> values;
    std::vector<int> dims;
    try {
        values = doc["theta"].get<std::vector<double>>();
        if (doc.contains("shape")) dims = doc["shape"].get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("theta: ") + e.what(), 0);
    }
    if (!dims.empty()) {
        long long total = 1;
        for (int d : dims) total *= d;
        if (total != static_cast<long long>(values.size())) {
            throw ParseError("theta: shape does not match the number of values", 0);
        }
    }
    if (shape) *shape = dims;
    return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::uint64_t theta_hash(const Vector& theta) {
    return fnv1a(theta.data(), sizeof(double) * static_cast<std::size_t>(theta.size()));
}

}  // namespace fpg
