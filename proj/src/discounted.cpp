#include "fpg/discounted.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "fpg/detail/policy_cache.hpp"

namespace fpg {

DiscountedFit discounted_fit(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda,
                             double gamma) {
    if (!(lambda >= 0.0)) throw InputError("ridge parameter lambda must be >= 0");
    if (!(gamma > 0.0 && gamma < 1.0)) throw InputError("discount gamma must lie in (0, 1)");
    if (data.size() == 0) throw InputError("discounted_fit needs K >= 1 episodes");
    const int H = data.horizon(), d = phi.dim(), m = target.n_params();
    const int S = phi.n_states(), A = phi.n_actions();

    DiscountedFit fit;
    fit.gamma = gamma;
    if (gamma <= 0.5) fit.warnings.push_back("gamma <= 1/2 lies outside the range covered by the error analysis");

    // The time-homogeneous estimator evaluates a stationary policy; step 0 is used.
    detail::NextStateCache cache(target, phi);
    Matrix gram = Matrix::Zero(d, d);
    Vector phi_r = Vector::Zero(d);
    Matrix cross_t = Matrix::Zero(d, d);
    std::vector<Matrix> grad_cross_t(m);
    for (const Episode& ep : data.episodes()) {
        for (int h = 0; h < H; ++h) {
            const Step& st = ep.steps[h];
            if (st.s >= S || st.a >= A || st.s_next >= S) {
                throw ConfigError("dataset ids exceed the feature map's state/action counts");
            }
            const auto f = phi.phi(st.s, st.a);
            const auto& nz = phi.nonzeros(st.s, st.a);
            const detail::NextStateStats& next = cache.get(0, st.s_next);
            for (int i : nz) {
                gram.col(i) += f[i] * f;
                cross_t.col(i) += f[i] * next.mean_phi;
            }
            phi_r += st.r * f;
            for (int c = 0; c < next.range.count; ++c) {
                Matrix& acc = grad_cross_t[next.range.first + c];
                if (acc.size() == 0) acc = Matrix::Zero(d, d);
                for (int i : nz) acc.col(i) += f[i] * next.score_phi.col(c);
            }
        }
    }
    gram.diagonal().array() += lambda;
    // (HK) factors cancel between Sigma^{-1} and the pooled right-hand sides.
    const SpdSolver solver(gram, lambda == 0.0, "discounted_fit pooled covariance");
    fit.w_r = solver.solve(phi_r);
    fit.M = solver.solve(Matrix(cross_t.transpose()));
    fit.grad_M.resize(m);
    for (int j = 0; j < m; ++j) {
        fit.grad_M[j] = grad_cross_t[j].size() == 0 ? Matrix::Zero(d, d)
                                                     : solver.solve(Matrix(grad_cross_t[j].transpose()));
    }

    const Matrix gm = gamma * fit.M;
    const Eigen::VectorXcd eig = gm.eigenvalues();
    Eigen::Index idx = 0;
    fit.spectral_radius = eig.cwiseAbs().maxCoeff();
    (eig.array() - 1.0).abs().minCoeff(&idx);

    const Matrix resolvent_lhs = Matrix::Identity(d, d) - gm;
    const Eigen::PartialPivLU<Matrix> lu(resolvent_lhs);
    const double rcond = lu.rcond();
    if (!(rcond >= 1e-12)) {
        std::ostringstream msg;
        msg << "I - gamma M is singular (rcond " << rcond << "); eigenvalue of gamma M closest to 1: "
            << eig[idx].real() << (eig[idx].imag() >= 0 ? "+" : "") << eig[idx].imag() << "i";
        throw NumericalError(msg.str());
    }
    if (fit.spectral_radius >= 1.0) {
        fit.warnings.push_back("spectral radius of gamma M is " + std::to_string(fit.spectral_radius) +
                               " >= 1: the Neumann series diverges");
    }
    fit.w = lu.solve(fit.w_r);
    fit.grad_w.resize(m);
    for (int j = 0; j < m; ++j) fit.grad_w[j] = lu.solve(Vector(gamma * (fit.grad_M[j] * fit.w)));
    return fit;
}

GradientEstimate discounted_fpg_estimate(const DiscountedFit& fit, const Policy& target, const FeatureMap& phi,
                                         const Vector& xi) {
    const auto t0 = std::chrono::steady_clock::now();
    const int m = target.n_params();
    Matrix W(fit.w.size(), m);
    for (int j = 0; j < m; ++j) W.col(j) = fit.grad_w[j];

    GradientEstimate est;
    est.grad = initial_gradient(fit.w, W, target, phi, xi);
    est.method = "fpg_discounted";
    est.warnings = fit.warnings;
    const double bound = 1.0 / (1.0 - fit.gamma);
    const double q_max = (phi.table().transpose() * fit.w).cwiseAbs().maxCoeff();
    if (q_max > 2.0 * bound) {
        est.warnings.push_back("fitted |Q| reaches " + std::to_string(q_max) + " > 2/(1-gamma)");
    }
    est.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return est;
}

}  // namespace fpg
