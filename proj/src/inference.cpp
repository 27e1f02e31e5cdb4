#include "fpg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fpg/detail/policy_cache.hpp"

namespace fpg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Symmetric inverse square root. Throws NumericalError naming `what` when the
// matrix is singular relative to its largest eigenvalue.
Matrix inverse_sqrt(const Matrix& sigma, const std::string& what) {
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    const Vector& ev = eig.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 0.0);
    Eigen::Index idx = 0;
    const double low = ev.minCoeff(&idx);
    if (!(low > 1e-12 * std::max(top, 1e-300))) {
        const Vector dir = eig.eigenvectors().col(idx);
        Eigen::Index big = 0;
        dir.cwiseAbs().maxCoeff(&big);
        throw NumericalError(what + " is singular (smallest eigenvalue " + std::to_string(low) +
                             ", null direction dominated by feature " + std::to_string(big) + ")");
    }
    return eig.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

double top_eigenvalue(const Matrix& sym) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double bottom_eigenvalue(const Matrix& sym) {
    return Eigen::SelfAdjointEigenSolver<Matrix>(sym, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

Matrix sample_covariance(const Matrix& rows) {
    const Eigen::Index n = rows.rows();
    const Matrix centered = rows.rowwise() - rows.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

}  // namespace

QWeights oracle_q_weights(const MdpSpec& mdp, const Policy& target, const FeatureMap& phi) {
    check_dims(mdp, target);
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    const ExactEvaluation ev = exact_evaluation(mdp, target);
    const int H = mdp.horizon(), d = phi.dim(), m = target.n_params();
    const int S = mdp.n_states(), A = mdp.n_actions();
    const Eigen::ColPivHouseholderQR<Matrix> qr(phi.table().transpose());

    QWeights out;
    out.w.assign(H + 1, Vector::Zero(d));
    out.W.assign(H + 1, Matrix::Zero(d, m));
    for (int h = 0; h < H; ++h) {
        Vector q(S * A);
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) q[s * A + a] = ev.q[h](s, a);
        }
        out.w[h] = qr.solve(q);
        out.W[h] = qr.solve(ev.grad_q[h]);
    }
    return out;
}

Residuals residuals(const Dataset& data, const Policy& target, const FeatureMap& phi, const QWeights& q) {
    const int H = data.horizon();
    const std::size_t K = data.size();
    detail::NextStateCache cache(target, phi);
    Residuals out;
    out.eps = Matrix::Zero(H, static_cast<Eigen::Index>(K));
    out.grad_eps.assign(H, std::vector<Vector>(K));
    for (std::size_t k = 0; k < K; ++k) {
        for (int h = 0; h < H; ++h) {
            const Step& st = data[k].steps[h];
            const auto f = phi.phi(st.s, st.a);
            double eps = f.dot(q.w[h]) - st.r;
            Vector grad = q.W[h].transpose() * f;
            if (h + 1 < H) {
                const detail::NextStateStats& next = cache.get(h + 1, st.s_next);
                eps -= next.mean_phi.dot(q.w[h + 1]);
                grad.noalias() -= q.W[h + 1].transpose() * next.mean_phi;
                grad.segment(next.range.first, next.range.count) -= next.score_phi.transpose() * q.w[h + 1];
            }
            out.eps(h, static_cast<Eigen::Index>(k)) = eps;
            out.grad_eps[h][k] = std::move(grad);
        }
    }
    return out;
}

CovarianceEstimate lambda_hat(const Dataset& data, const Policy& target, const FeatureMap& phi,
                              const NuTheta& nu, const QWeights& q, const std::vector<Matrix>& sigma) {
    if (data.size() < 2) throw InputError("lambda_hat needs K >= 2 episodes");
    const int H = data.horizon(), m = target.n_params();
    const auto K = static_cast<Eigen::Index>(data.size());
    const Residuals res = residuals(data, target, phi, q);

    CovarianceEstimate out;
    out.lambda_hat = Matrix::Zero(m, m);
    out.influence.resize(H);
    for (int h = 0; h < H; ++h) {
        const SpdSolver solver(sigma[h], true, "covariance at step h=" + std::to_string(h + 1));
        const Vector u = solver.solve(nu.nu[h]);
        const Matrix U = solver.solve(nu.grad_nu[h]);
        Matrix g(K, m);
        for (Eigen::Index k = 0; k < K; ++k) {
            const Step& st = data[static_cast<std::size_t>(k)].steps[h];
            const auto f = phi.phi(st.s, st.a);
            g.row(k) = (f.dot(u) * res.grad_eps[h][k] + res.eps(h, k) * (U.transpose() * f)).transpose();
        }
        out.lambda_hat += sample_covariance(g);
        out.influence[h] = std::move(g);
    }
    out.lambda_hat = 0.5 * (out.lambda_hat + out.lambda_hat.transpose());
    return out;
}

NuTheta fitted_nu(const FittedModel& model, const Policy& target, const FeatureMap& phi, const Vector& xi) {
    const int H = model.horizon, d = model.dim, m = model.n_params;
    if (xi.size() != phi.n_states()) throw ConfigError("initial distribution length differs from the state count");
    detail::NextStateCache cache(target, phi);
    NuTheta out;
    out.nu.assign(H, Vector::Zero(d));
    out.grad_nu.assign(H, Matrix::Zero(d, m));
    for (int s = 0; s < phi.n_states(); ++s) {
        if (xi[s] == 0.0) continue;
        const detail::NextStateStats& st = cache.get(0, s);
        out.nu[0] += xi[s] * st.mean_phi;
        out.grad_nu[0].middleCols(st.range.first, st.range.count) += xi[s] * st.score_phi;
    }
    for (int h = 0; h + 1 < H; ++h) {
        const Matrix Mt = model.M[h].transpose();
        out.nu[h + 1] = Mt * out.nu[h];
        out.grad_nu[h + 1] = Mt * out.grad_nu[h];
        for (int j = 0; j < m; ++j) out.grad_nu[h + 1].col(j) += model.grad_M[h][j].transpose() * out.nu[h];
    }
    return out;
}

CovarianceEstimate plugin_lambda_hat(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                     double lambda, const Vector& xi) {
    const FittedModel model = fit_model(data, target, phi, lambda);
    const QWeights q = fpg_recursion(model);
    const NuTheta nu = fitted_nu(model, target, phi, xi);
    return lambda_hat(data, target, phi, nu, q, empirical_covariance(data, phi, lambda));
}

CovarianceEstimate oracle_lambda_hat(const Dataset& data, const MdpSpec& mdp, const Policy& target,
                                     const ActionDistribution& behavior, const FeatureMap& phi) {
    const QWeights q = oracle_q_weights(mdp, target, phi);
    const NuTheta nu = nu_theta(mdp, target, phi);
    return lambda_hat(data, target, phi, nu, q, population_covariance(mdp, behavior, phi));
}

BoundReport bound_report(const MdpSpec& mdp, const Policy& target, const ActionDistribution& behavior,
                         const FeatureMap& phi) {
    check_dims(mdp, target);
    check_dims(mdp, behavior);
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    const int H = mdp.horizon(), d = phi.dim(), m = target.n_params(), S = mdp.n_states();
    const double G = target.score_bound();

    const OccupancyMeasure occ_b = occupancy(mdp, behavior);
    const OccupancyMeasure occ_t = occupancy(mdp, target);
    std::vector<Matrix> root(H), sigma_t(H);
    for (int h = 0; h < H; ++h) {
        root[h] = inverse_sqrt(covariance_from_occupancy(occ_b.mu[h], phi),
                               "behavior covariance Sigma_h at h=" + std::to_string(h + 1));
        sigma_t[h] = covariance_from_occupancy(occ_t.mu[h], phi);
    }

    BoundReport out;
    detail::NextStateCache cache(target, phi);
    for (int h = 0; h < H; ++h) {
        const double top = top_eigenvalue(root[h] * sigma_t[h] * root[h]);
        double den = 1.0;
        if (h + 1 < H) den = std::min(bottom_eigenvalue(root[h + 1] * sigma_t[h + 1] * root[h + 1]), 1.0);
        out.kappa1 = std::max(out.kappa1, den > 0.0 ? top / den : kInf);
        if (h + 1 >= H) continue;

        // Second moments of the policy-averaged features at the next state.
        const Vector rho = occ_b.mu[h + 1].rowwise().sum();
        Matrix mean_outer = Matrix::Zero(d, d);
        std::vector<Matrix> grad_outer(m);
        for (int s = 0; s < S; ++s) {
            if (rho[s] == 0.0) continue;
            const detail::NextStateStats& st = cache.get(h + 1, s);
            mean_outer.noalias() += rho[s] * st.mean_phi * st.mean_phi.transpose();
            for (int c = 0; c < st.range.count; ++c) {
                Matrix& acc = grad_outer[st.range.first + c];
                if (acc.size() == 0) acc = Matrix::Zero(d, d);
                acc.noalias() += rho[s] * st.score_phi.col(c) * st.score_phi.col(c).transpose();
            }
        }
        const Matrix& R = root[h + 1];
        out.kappa2 = std::max(out.kappa2, std::sqrt(std::max(top_eigenvalue(R * mean_outer * R), 0.0)));
        for (const Matrix& acc : grad_outer) {
            if (acc.size() == 0) continue;
            out.kappa3 = std::max(out.kappa3, std::sqrt(std::max(top_eigenvalue(R * acc * R), 0.0)) / G);
        }
    }

    const NuTheta nu = nu_theta(mdp, target, phi);
    out.nu_norm.resize(H);
    double nu_max = 0.0;
    Vector grad_nu_max = Vector::Zero(m);
    for (int h = 0; h < H; ++h) {
        out.nu_norm[h] = (root[h] * nu.nu[h]).norm();
        nu_max = std::max(nu_max, out.nu_norm[h]);
        const Vector col_norms = (root[h] * nu.grad_nu[h]).colwise().norm().transpose();
        grad_nu_max = grad_nu_max.cwiseMax(col_norms);
    }
    const double Hd = static_cast<double>(H);
    out.b_theta = (Hd * Hd * G * nu_max) * Vector::Ones(m) + Hd * grad_nu_max;

    out.chi2_F = std::max(chi2_restricted(occ_t, occ_b, phi), 0.0);
    std::vector<Matrix> sigma_b(H);
    for (int h = 0; h < H; ++h) sigma_b[h] = covariance_from_occupancy(occ_b.mu[h], phi);
    out.C1d_max = max_leverage(sigma_b, phi);

    try {
        const Matrix r1 = inverse_sqrt(sigma_t[0], "target covariance at h=1");
        const double grad_term = (r1 * nu.grad_nu[0]).colwise().norm().maxCoeff();
        const double nu_term = Hd * G * (r1 * nu.nu[0]).norm();
        out.C_theta = 240.0 * out.C1d_max * std::sqrt(static_cast<double>(m)) * Hd * Hd * Hd * out.kappa1 *
                      (5.0 + out.kappa2 + out.kappa3) * (grad_term + nu_term);
    } catch (const NumericalError&) {
        out.C_theta = kInf;
    }
    return out;
}

Vector reward_free_bound(const BoundReport& report, int horizon, int n_params, std::size_t episodes,
                         double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
    if (episodes == 0) throw InputError("reward_free_bound needs K >= 1");
    const double c = std::min(report.C1d_max, static_cast<double>(horizon));
    const double scale = 4.0 * std::sqrt(c * std::log(8.0 * n_params / delta) / static_cast<double>(episodes));
    return scale * report.b_theta;
}

GradientEstimate estimate_on_resample(const Dataset& data, const Policy& target, const FeatureMap& phi,
                                      const BootstrapConfig& config, const std::vector<std::size_t>& indices) {
    return fpg_estimate(data.resample(indices), target, phi, config.lambda, config.xi);
}

Matrix bootstrap(const Dataset& data, const Policy& target, const FeatureMap& phi, const BootstrapConfig& config,
                 std::size_t replicates, std::uint64_t seed) {
    if (replicates == 0) throw InputError("bootstrap needs B >= 1 replicates");
    if (data.size() == 0) throw InputError("bootstrap needs K >= 1 episodes");
    const std::size_t K = data.size();
    Matrix out(static_cast<Eigen::Index>(replicates), target.n_params());
    parallel_for(replicates, [&](std::size_t b) {
        Rng rng = stream_rng(seed, b);
        std::uniform_int_distribution<std::size_t> pick(0, K - 1);
        std::vector<std::size_t> idx(K);
        for (auto& i : idx) i = pick(rng);
        out.row(static_cast<Eigen::Index>(b)) = estimate_on_resample(data, target, phi, config, idx).grad.transpose();
    });
    return out;
}

std::vector<Interval> percentile_intervals(const Matrix& samples, double level) {
    if (!(level > 0.0 && level < 1.0)) throw InputError("interval level must lie in (0, 1)");
    if (samples.rows() == 0) throw InputError("percentile_intervals needs at least one sample");
    const double lo_q = 0.5 * (1.0 - level), hi_q = 1.0 - lo_q;
    auto quantile = [](const std::vector<double>& sorted, double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        if (i + 1 >= sorted.size()) return sorted.back();
        const double t = pos - static_cast<double>(i);
        return sorted[i] + t * (sorted[i + 1] - sorted[i]);
    };
    std::vector<Interval> out(static_cast<std::size_t>(samples.cols()));
    for (Eigen::Index j = 0; j < samples.cols(); ++j) {
        std::vector<double> col(samples.col(j).data(), samples.col(j).data() + samples.rows());
        std::sort(col.begin(), col.end());
        out[static_cast<std::size_t>(j)] = {quantile(col, lo_q), quantile(col, hi_q)};
    }
    return out;
}

}  // namespace fpg
