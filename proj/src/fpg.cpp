#include "fpg/fpg.hpp"

#include <chrono>
#include <cmath>
#include <optional>

#include "fpg/detail/policy_cache.hpp"

namespace fpg {

FittedModel fit_model(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda) {
    if (!(lambda >= 0.0)) throw InputError("ridge parameter lambda must be >= 0");
    if (data.size() == 0) throw InputError("fit_model needs K >= 1 episodes");
    if (target.n_states() != phi.n_states() || target.n_actions() != phi.n_actions()) {
        throw ConfigError("target policy and feature map disagree on state/action counts");
    }
    const int H = data.horizon(), d = phi.dim(), m = target.n_params();
    const int S = phi.n_states(), A = phi.n_actions();

    FittedModel model;
    model.horizon = H;
    model.dim = d;
    model.n_params = m;
    model.w_r.resize(H);
    model.M.resize(H);
    model.grad_M.resize(H);

    detail::NextStateCache cache(target, phi);

    for (int h = 0; h < H; ++h) {
        Matrix gram = Matrix::Zero(d, d);
        Vector phi_r = Vector::Zero(d);
        Matrix cross_t = Matrix::Zero(d, d);  // transpose of sum_k phi_k E[phi']^T
        std::vector<Matrix> grad_cross_t(m);  // transposes, allocated on first touch
        for (const Episode& ep : data.episodes()) {
            const Step& st = ep.steps[h];
            if (st.s >= S || st.a >= A || st.s_next >= S) {
                throw ConfigError("dataset ids exceed the feature map's state/action counts");
            }
            const auto f = phi.phi(st.s, st.a);
            const auto& nz = phi.nonzeros(st.s, st.a);
            const detail::NextStateStats& next = cache.get(h + 1, st.s_next);
            for (int i : nz) {
                const double fi = f[i];
                gram.col(i) += fi * f;
                cross_t.col(i) += fi * next.mean_phi;
            }
            phi_r += st.r * f;
            for (int c = 0; c < next.range.count; ++c) {
                Matrix& acc = grad_cross_t[next.range.first + c];
                if (acc.size() == 0) acc = Matrix::Zero(d, d);
                const auto col = next.score_phi.col(c);
                for (int i : nz) acc.col(i) += f[i] * col;
            }
        }
        gram.diagonal().array() += lambda;

        const SpdSolver solver(gram, lambda == 0.0, "fit_model at step h=" + std::to_string(h + 1));
        model.w_r[h] = solver.solve(phi_r);
        model.M[h] = solver.solve(Matrix(cross_t.transpose()));
        model.grad_M[h].resize(m);
        for (int j = 0; j < m; ++j) {
            if (grad_cross_t[j].size() == 0) {
                model.grad_M[h][j] = Matrix::Zero(d, d);
            } else {
                model.grad_M[h][j] = solver.solve(Matrix(grad_cross_t[j].transpose()));
            }
        }
    }
    return model;
}

FittedValues fpg_recursion(const FittedModel& model) {
    const int H = model.horizon, d = model.dim, m = model.n_params;
    FittedValues out;
    out.w.assign(H + 1, Vector::Zero(d));
    out.W.assign(H + 1, Matrix::Zero(d, m));
    for (int h = H - 1; h >= 0; --h) {
        const Vector& w_next = out.w[h + 1];
        out.w[h] = model.w_r[h] + model.M[h] * w_next;
        Matrix W = model.M[h] * out.W[h + 1];
        for (int j = 0; j < m; ++j) W.col(j).noalias() += model.grad_M[h][j] * w_next;
        out.W[h] = std::move(W);
    }
    return out;
}

Vector initial_gradient(const Vector& w1, const Matrix& W1, const Policy& target, const FeatureMap& phi,
                        const Vector& xi) {
    const int S = phi.n_states(), A = phi.n_actions();
    if (xi.size() != S) throw ConfigError("initial distribution length differs from the state count");
    Vector grad = Vector::Zero(target.n_params());
    for (int s = 0; s < S; ++s) {
        if (xi[s] == 0.0) continue;
        const Vector pi = target.prob(0, s);
        const ParamRange range = target.score_support(0, s);
        const Matrix block = target.score_block(0, s);
        for (int a = 0; a < A; ++a) {
            const double weight = xi[s] * pi[a];
            if (weight == 0.0) continue;
            const auto f = phi.phi(s, a);
            grad.noalias() += weight * (W1.transpose() * f);
            grad.segment(range.first, range.count) += (weight * f.dot(w1)) * block.row(a).transpose();
        }
    }
    return grad;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

GradientEstimate fpg_estimate(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda,
                              const Vector& xi) {
    const auto t0 = std::chrono::steady_clock::now();
    const FittedModel model = fit_model(data, target, phi, lambda);
    const FittedValues values = fpg_recursion(model);

    GradientEstimate est;
    est.grad = initial_gradient(values.w[0], values.W[0], target, phi, xi);
    est.method = "fpg";
    est.episodes = data.size();
    est.lambda = lambda;
    est.seed = data.meta().seed;

    const int H = data.horizon();
    double q_max = 0.0;
    for (int h = 0; h < H; ++h) q_max = std::max(q_max, (phi.table().transpose() * values.w[h]).cwiseAbs().maxCoeff());
    if (q_max > 2.0 * H) {
        est.warnings.push_back("fitted |Q| reaches " + std::to_string(q_max) + " > 2H: heavy extrapolation");
    }
    if (!est.grad.allFinite()) throw NumericalError("FPG estimate is not finite");
    est.wall_ms = elapsed_ms(t0);
    return est;
}

// ---------------------------------------------------------------------------

namespace {

// Ridge regression onto the feature class, solved from the augmented design
// [Phi; sqrt(lambda) I] by Householder QR (no normal equations).
class RidgeRegression {
public:
    RidgeRegression(const Matrix& design, double lambda, int step) : d_(design.cols()), k_(design.rows()) {
        Matrix aug(k_ + d_, d_);
        aug.topRows(k_) = design;
        aug.bottomRows(d_) = std::sqrt(lambda) * Matrix::Identity(d_, d_);
        qr_.compute(aug);
        if (qr_.rank() < d_) {
            throw NumericalError("model-based regression at step h=" + std::to_string(step) +
                                 " is rank deficient (rank " + std::to_string(qr_.rank()) + " < d=" +
                                 std::to_string(d_) + ")");
        }
    }

    /// Coefficients (d x c) for targets y (K x c).
    Matrix solve(const Matrix& y) const {
        Matrix aug = Matrix::Zero(k_ + d_, y.cols());
        aug.topRows(k_) = y;
        return qr_.solve(aug);
    }

private:
    Eigen::Index d_;
    Eigen::Index k_;
    Eigen::ColPivHouseholderQR<Matrix> qr_;
};

}  // namespace

GradientEstimate model_based_estimate(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                      double lambda, const Vector& xi) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(lambda >= 0.0)) throw InputError("ridge parameter lambda must be >= 0");
    if (data.size() == 0) throw InputError("model_based_estimate needs K >= 1 episodes");
    const int H = data.horizon(), S = phi.n_states(), A = phi.n_actions(), m = target.n_params();
    const Eigen::Index K = static_cast<Eigen::Index>(data.size());
    const Eigen::Index SA = static_cast<Eigen::Index>(S) * A;
    const Matrix feature_rows = phi.table().transpose();  // (S*A) x d

    // Function tables over S x A: Q (SA) and grad Q (SA x m), terminal layer zero.
    Vector q_next = Vector::Zero(SA);
    Matrix gq_next = Matrix::Zero(SA, m);

    auto score_table = [&](int h) {
        Matrix table = Matrix::Zero(SA, m);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) table.row(static_cast<Eigen::Index>(s) * A + a) = target.score(h, s, a).transpose();
        }
        return table;
    };

    for (int h = H - 1; h >= 0; --h) {
        Matrix design(K, phi.dim());
        Vector rewards(K);
        for (Eigen::Index k = 0; k < K; ++k) {
            const Step& st = data[k].steps[h];
            if (st.s >= S || st.a >= A || st.s_next >= S) {
                throw ConfigError("dataset ids exceed the feature map's state/action counts");
            }
            design.row(k) = phi.phi(st.s, st.a).transpose();
            rewards[k] = st.r;
        }
        const RidgeRegression reg(design, lambda, h + 1);

        // Functions pushed through P_hat: column 0 is Q_{h+1}, column 1 + j is
        // score_j * Q_{h+1} + grad_j Q_{h+1}.
        const Matrix scores = score_table(h + 1);
        Matrix f(SA, 1 + m);
        f.col(0) = q_next;
        f.rightCols(m) = scores.array().colwise() * q_next.array();
        f.rightCols(m) += gq_next;

        // Targets: integrate each function against pi_{h+1}(.|s'_k).
        Matrix y(K, 1 + m);
        for (Eigen::Index k = 0; k < K; ++k) {
            const int s2 = data[k].steps[h].s_next;
            const Vector pi = target.prob(h + 1, s2);
            y.row(k) = pi.transpose() * f.middleRows(static_cast<Eigen::Index>(s2) * A, A);
        }
        const Matrix coef = reg.solve(y);
        const Vector r_hat = feature_rows * reg.solve(Matrix(rewards));

        const Matrix pushed = feature_rows * coef;
        q_next = r_hat + pushed.col(0);
        gq_next = pushed.rightCols(m);
    }

    Vector grad = Vector::Zero(m);
    const Matrix scores0 = score_table(0);
    for (int s = 0; s < S; ++s) {
        if (xi[s] == 0.0) continue;
        const Vector pi = target.prob(0, s);
        for (int a = 0; a < A; ++a) {
            const Eigen::Index row = static_cast<Eigen::Index>(s) * A + a;
            grad += xi[s] * pi[a] * (gq_next.row(row).transpose() + scores0.row(row).transpose() * q_next[row]);
        }
    }

    GradientEstimate est;
    est.grad = grad;
    est.method = "model_based";
    est.episodes = data.size();
    est.lambda = lambda;
    est.seed = data.meta().seed;
    est.wall_ms = elapsed_ms(t0);
    return est;
}

}  // namespace fpg
