#include "fpg/features.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "fpg/dataset.hpp"

namespace fpg {

FeatureMap::FeatureMap(int n_states, int n_actions, Matrix table, bool one_hot)
    : n_states_(n_states), n_actions_(n_actions), table_(std::move(table)), one_hot_(one_hot) {
    if (!table_.allFinite()) throw ConfigError("feature table has non-finite entries");
    if (table_.rows() == 0) throw ConfigError("feature dimension must be positive");
    nonzeros_.resize(static_cast<std::size_t>(table_.cols()));
    for (Eigen::Index c = 0; c < table_.cols(); ++c) {
        for (Eigen::Index i = 0; i < table_.rows(); ++i) {
            if (table_(i, c) != 0.0) nonzeros_[c].push_back(static_cast<int>(i));
        }
    }
}

FeatureMap FeatureMap::one_hot(int n_states, int n_actions) {
    if (n_states <= 0 || n_actions <= 0) throw ConfigError("feature map needs positive dimensions");
    const Eigen::Index n = static_cast<Eigen::Index>(n_states) * n_actions;
    return FeatureMap(n_states, n_actions, Matrix::Identity(n, n), true);
}

FeatureMap FeatureMap::from_rows(int n_states, int n_actions, const Matrix& rows) {
    if (rows.rows() != static_cast<Eigen::Index>(n_states) * n_actions) {
        throw ConfigError("feature table needs one row per (state, action) pair");
    }
    return FeatureMap(n_states, n_actions, rows.transpose(), false);
}

FeatureMap FeatureMap::from_json(const std::string& text) {
    try {
        auto doc = nlohmann::json::parse(text);
        const int S = doc.at("n_states").get<int>();
        const int A = doc.at("n_actions").get<int>();
        auto rows = doc.at("rows").get<std::vector<std::vector<double>>>();
        if (rows.empty()) throw ConfigError("feature file has no rows");
        Matrix table(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows[0].size()) throw ConfigError("feature rows have different lengths");
            for (std::size_t j = 0; j < rows[i].size(); ++j) table(i, j) = rows[i][j];
        }
        return from_rows(S, A, table);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("feature file: ") + e.what(), 0);
    }
}

bool FeatureMap::constant_in_span() const {
    // least squares fit of the all-ones vector over (s, a) rows
    const Matrix rows = table_.transpose();
    const Vector ones = Vector::Ones(rows.rows());
    const Vector w = rows.colPivHouseholderQr().solve(ones);
    return (rows * w - ones).norm() <= 1e-8 * std::sqrt(static_cast<double>(ones.size()));
}

void FeatureMap::check_dims(int n_states, int n_actions) const {
    if (n_states != n_states_ || n_actions != n_actions_) {
        throw ConfigError("feature map is defined on " + std::to_string(n_states_) + "x" +
                          std::to_string(n_actions_) + ", expected " + std::to_string(n_states) + "x" +
                          std::to_string(n_actions));
    }
}

// ---------------------------------------------------------------------------

SpdSolver::SpdSolver(const Matrix& a, bool check_singular, const std::string& context) {
    const Matrix off = a - Matrix(a.diagonal().asDiagonal());
    diagonal_ = (off.array() == 0.0).all();
    if (diagonal_) {
        const Vector diag = a.diagonal();
        const double top = diag.cwiseAbs().maxCoeff();
        Eigen::Index worst = 0;
        const double low = diag.minCoeff(&worst);
        if (!(low > 0.0) || (check_singular && low < 1e-12 * top)) {
            throw NumericalError(context + ": covariance is singular along feature direction e_" +
                                 std::to_string(worst));
        }
        inv_diag_ = diag.cwiseInverse();
        return;
    }
    ldlt_.compute(a);
    // LDLT solves treat zero pivots as a pseudo-inverse, so rcond alone misses exact singularity.
    const Vector pivots = ldlt_.vectorD().cwiseAbs();
    const bool tiny_pivot = !(pivots.minCoeff() > 1e-12 * pivots.maxCoeff());
    if (ldlt_.info() != Eigen::Success || (check_singular && (tiny_pivot || !(ldlt_.rcond() >= 1e-12)))) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
        Eigen::Index idx = 0;
        eig.eigenvectors().col(0).cwiseAbs().maxCoeff(&idx);
        throw NumericalError(context + ": covariance is singular (smallest eigenvalue " +
                             std::to_string(eig.eigenvalues()[0]) + ", null direction dominated by e_" +
                             std::to_string(idx) + ")");
    }
}

Matrix SpdSolver::solve(const Matrix& rhs) const {
    if (diagonal_) return inv_diag_.asDiagonal() * rhs;
    return ldlt_.solve(rhs);
}

Vector SpdSolver::solve(const Vector& rhs) const {
    if (diagonal_) return inv_diag_.cwiseProduct(rhs);
    return ldlt_.solve(rhs);
}

// ---------------------------------------------------------------------------

std::vector<Matrix> empirical_covariance(const Dataset& data, const FeatureMap& phi, double lambda) {
    if (!(lambda >= 0.0)) throw InputError("ridge parameter lambda must be >= 0");
    if (data.size() == 0) throw InputError("empirical covariance needs K >= 1");
    const int H = data.horizon(), d = phi.dim();
    const double K = static_cast<double>(data.size());
    std::vector<Matrix> out(H, Matrix::Zero(d, d));
    for (int h = 0; h < H; ++h) {
        Matrix& sig = out[h];
        for (const Episode& ep : data.episodes()) {
            const Step& st = ep.steps[h];
            const auto f = phi.phi(st.s, st.a);
            for (int j : phi.nonzeros(st.s, st.a)) sig.col(j) += f[j] * f;
        }
        sig.diagonal().array() += lambda;
        sig /= K;
    }
    return out;
}

Matrix covariance_from_occupancy(const Matrix& mu, const FeatureMap& phi) {
    const int d = phi.dim();
    Matrix sig = Matrix::Zero(d, d);
    for (int s = 0; s < mu.rows(); ++s) {
        for (int a = 0; a < mu.cols(); ++a) {
            const double w = mu(s, a);
            if (w == 0.0) continue;
            const auto f = phi.phi(s, a);
            for (int j : phi.nonzeros(s, a)) sig.col(j) += (w * f[j]) * f;
        }
    }
    return sig;
}

Vector mean_from_occupancy(const Matrix& mu, const FeatureMap& phi) {
    Vector nu = Vector::Zero(phi.dim());
    for (int s = 0; s < mu.rows(); ++s) {
        for (int a = 0; a < mu.cols(); ++a) {
            if (mu(s, a) != 0.0) nu += mu(s, a) * phi.phi(s, a);
        }
    }
    return nu;
}

std::vector<Matrix> population_covariance(const MdpSpec& mdp, const ActionDistribution& behavior,
                                          const FeatureMap& phi) {
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    const OccupancyMeasure occ = occupancy(mdp, behavior);
    std::vector<Matrix> out;
    out.reserve(occ.mu.size());
    for (const Matrix& mu : occ.mu) out.push_back(covariance_from_occupancy(mu, phi));
    return out;
}

std::vector<Matrix> target_covariance(const MdpSpec& mdp, const ActionDistribution& target,
                                      const FeatureMap& phi) {
    return population_covariance(mdp, target, phi);
}

std::vector<Matrix> occupancy_gradient(const MdpSpec& mdp, const Policy& policy) {
    check_dims(mdp, policy);
    const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon(), m = policy.n_params();
    const OccupancyMeasure occ = occupancy(mdp, policy);
    // G_h(s,a) = E[1{s_h=s, a_h=a} sum_{h'<=h} score_{h'}]
    //   G_1(s,a)     = mu_1(s,a) score_1(s,a)
    //   G_{h+1}(s,a) = pi(a|s) sum_{s0,a0} p_h(s|s0,a0) G_h(s0,a0) + mu_{h+1}(s,a) score_{h+1}(s,a)
    std::vector<Matrix> grad(H, Matrix::Zero(static_cast<Eigen::Index>(S) * A, m));
    Matrix carried = Matrix::Zero(S, m);  // sum_{s0,a0} p(s|s0,a0) G_h(s0,a0)
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            const Vector pi = policy.prob(h, s);
            const ParamRange range = policy.score_support(h, s);
            const Matrix block = policy.score_block(h, s);
            for (int a = 0; a < A; ++a) {
                auto row = grad[h].row(static_cast<Eigen::Index>(s) * A + a);
                if (h > 0) row = pi[a] * carried.row(s);
                row.segment(range.first, range.count) += occ.mu[h](s, a) * block.row(a);
            }
        }
        if (h + 1 == H) break;
        carried.setZero();
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                const auto row = grad[h].row(static_cast<Eigen::Index>(s) * A + a);
                const double* p = mdp.p_row(h, s, a);
                for (int s2 = 0; s2 < S; ++s2) {
                    if (p[s2] != 0.0) carried.row(s2) += p[s2] * row;
                }
            }
        }
    }
    return grad;
}

NuTheta nu_theta(const MdpSpec& mdp, const Policy& policy, const FeatureMap& phi) {
    phi.check_dims(mdp.n_states(), mdp.n_actions());
    const int S = mdp.n_states(), A = mdp.n_actions(), H = mdp.horizon();
    const OccupancyMeasure occ = occupancy(mdp, policy);
    const std::vector<Matrix> grad_mu = occupancy_gradient(mdp, policy);
    NuTheta out;
    for (int h = 0; h < H; ++h) {
        out.nu.push_back(mean_from_occupancy(occ.mu[h], phi));
        Matrix g = Matrix::Zero(phi.dim(), policy.n_params());
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                g += phi.phi(s, a) * grad_mu[h].row(static_cast<Eigen::Index>(s) * A + a);
            }
        }
        out.grad_nu.push_back(std::move(g));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct Spectral {
    Vector values;
    Matrix vectors;
};

Spectral eig_sym(const Matrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
    return {es.eigenvalues(), es.eigenvectors()};
}

double support_tolerance(const Vector& values) {
    const double top = values.cwiseAbs().maxCoeff();
    return std::max(top, 1e-300) * 1e-10 * static_cast<double>(values.size());
}

}  // namespace

MismatchResult mismatch_condition_number(const Matrix& sigma_data, const Matrix& sigma_target) {
    if (sigma_data.rows() != sigma_target.rows() || sigma_data.rows() != sigma_data.cols() ||
        sigma_target.rows() != sigma_target.cols()) {
        throw ConfigError("mismatch condition number needs square matrices of equal size");
    }
    MismatchResult out;
    const Spectral tgt = eig_sym(sigma_target);
    const double tgt_tol = support_tolerance(tgt.values);
    std::vector<Eigen::Index> tgt_idx;
    for (Eigen::Index i = 0; i < tgt.values.size(); ++i) {
        if (tgt.values[i] > tgt_tol) tgt_idx.push_back(i);
    }
    if (tgt_idx.empty()) throw ConfigError("target covariance is zero");
    const Eigen::Index r = static_cast<Eigen::Index>(tgt_idx.size());
    Matrix U(sigma_target.rows(), r);
    Vector sqrt_vals(r);
    for (Eigen::Index i = 0; i < r; ++i) {
        U.col(i) = tgt.vectors.col(tgt_idx[i]);
        sqrt_vals[i] = std::sqrt(tgt.values[tgt_idx[i]]);
    }

    const Spectral dat = eig_sym(sigma_data);
    const double dat_tol = support_tolerance(dat.values);
    Vector inv = Vector::Zero(dat.values.size());
    for (Eigen::Index i = 0; i < dat.values.size(); ++i) {
        if (dat.values[i] > dat_tol) {
            inv[i] = 1.0 / dat.values[i];
        } else {
            out.pseudo_inverse_used = true;
        }
    }
    if (out.pseudo_inverse_used) {
        // The data must cover every target direction.
        Matrix null_basis(dat.vectors.rows(), 0);
        for (Eigen::Index i = 0; i < dat.values.size(); ++i) {
            if (inv[i] == 0.0) {
                null_basis.conservativeResize(Eigen::NoChange, null_basis.cols() + 1);
                null_basis.col(null_basis.cols() - 1) = dat.vectors.col(i);
            }
        }
        if ((null_basis.transpose() * U).cwiseAbs().maxCoeff() > 1e-8) {
            out.value = std::numeric_limits<double>::infinity();
            return out;
        }
    }
    const Matrix data_pinv = dat.vectors * inv.asDiagonal() * dat.vectors.transpose();
    const Matrix core = sqrt_vals.asDiagonal() * (U.transpose() * data_pinv * U) * sqrt_vals.asDiagonal();
    const Vector ev = eig_sym(core).values;
    if (!(ev[0] > 0.0)) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    out.value = ev[ev.size() - 1] / ev[0];
    return out;
}

double chi2_restricted(const OccupancyMeasure& mu_target, const OccupancyMeasure& mu_behavior,
                       const FeatureMap& phi) {
    if (mu_target.mu.size() != mu_behavior.mu.size()) throw ConfigError("occupancies have different horizons");
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < mu_target.mu.size(); ++h) {
        const Vector nu = mean_from_occupancy(mu_target.mu[h], phi);
        const Spectral sp = eig_sym(covariance_from_occupancy(mu_behavior.mu[h], phi));
        const double tol = support_tolerance(sp.values);
        const Vector coords = sp.vectors.transpose() * nu;
        double quad = 0.0;
        Vector uncovered = Vector::Zero(nu.size());
        for (Eigen::Index i = 0; i < coords.size(); ++i) {
            if (sp.values[i] > tol) {
                quad += coords[i] * coords[i] / sp.values[i];
            } else {
                uncovered += coords[i] * sp.vectors.col(i);
            }
        }
        if (uncovered.norm() > 1e-9 * std::max(1.0, nu.norm())) {
            Eigen::Index idx = 0;
            uncovered.cwiseAbs().maxCoeff(&idx);
            throw NumericalError("chi2_F: behavior covariance at step h=" + std::to_string(h + 1) +
                                 " does not cover the target mean (uncovered direction dominated by e_" +
                                 std::to_string(idx) + ")");
        }
        best = std::max(best, quad - 1.0);
    }
    return best;
}

double max_leverage(const std::vector<Matrix>& sigma, const FeatureMap& phi) {
    double best = 0.0;
    for (std::size_t h = 0; h < sigma.size(); ++h) {
        const SpdSolver solver(sigma[h], true, "leverage at step h=" + std::to_string(h + 1));
        const Matrix sol = solver.solve(phi.table());
        best = std::max(best, (phi.table().array() * sol.array()).colwise().sum().maxCoeff());
    }
    return best;
}

}  // namespace fpg
