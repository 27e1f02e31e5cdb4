#include <doctest.h>

#include <cmath>

#include "fpg/baselines.hpp"
#include "fpg/dataset.hpp"
#include "fpg/discounted.hpp"
#include "fpg/envs.hpp"
#include "helpers.hpp"

using namespace fpg;
using fpg::test::gaussian;

namespace {

// Per-component check that the replication mean sits within 3 standard errors.
void check_unbiased(const Matrix& draws, const Vector& exact) {
    const Vector mean = draws.colwise().mean().transpose();
    const Matrix c = draws.rowwise() - mean.transpose();
    const double n = static_cast<double>(draws.rows());
    for (int j = 0; j < exact.size(); ++j) {
        const double se = std::sqrt(c.col(j).squaredNorm() / (n - 1) / n);
        CHECK(std::abs(mean[j] - exact[j]) <= 3 * se + 1e-12);
    }
}

}  // namespace

TEST_CASE("discounted: zero rewards and the M = 0 resolvent") {
    const MdpSpec mdp = random_mdp(3, 2, 5, 1);
    Rng rng(1);
    const SoftmaxTabularPolicy pi(3, 2, gaussian(rng, 6));
    const FeatureMap phi = FeatureMap::one_hot(3, 2);
    const Dataset data = simulate(mdp, pi, 50, 2);
    const DiscountedFit zero = discounted_fit(data.scale_rewards(0.0), pi, phi, 1e-3, 0.9);
    CHECK(zero.w.isZero(0.0));
    for (const Vector& g : zero.grad_w) CHECK(g.isZero(0.0));
    CHECK(discounted_fpg_estimate(zero, pi, phi, mdp.initial_dist()).grad.isZero(0.0));

    // phi(s, 1) = -phi(s, 0) under a uniform policy averages to zero, so M = 0.
    const FeatureMap signed_phi = FeatureMap::from_rows(1, 2, (Matrix(2, 1) << 1.0, -1.0).finished());
    const SoftmaxTabularPolicy uniform(1, 2);
    const Dataset bandit = simulate(test::bandit({0.8, 0.2}), uniform, 40, 3);
    const DiscountedFit fit = discounted_fit(bandit, uniform, signed_phi, 0.0, 0.3);
    CHECK(fit.M.isZero(1e-15));
    CHECK((fit.w - fit.w_r).norm() <= 1e-15);
    CHECK_FALSE(fit.warnings.empty());  // gamma <= 1/2
}

TEST_CASE("discounted: constant reward on one state and one action") {
    const MdpSpec mdp(1, 1, 4, {1.0}, {1.0}, Vector::Ones(1));
    const SoftmaxTabularPolicy pi(1, 1);
    const FeatureMap phi = FeatureMap::one_hot(1, 1);
    const DiscountedFit fit = discounted_fit(simulate(mdp, pi, 3, 1), pi, phi, 0.0, 0.9);
    CHECK(fit.w[0] == doctest::Approx(10.0));
    CHECK(discounted_fpg_estimate(fit, pi, phi, Vector::Ones(1)).grad.norm() == 0.0);
}

TEST_CASE("discounted: resolvent identities and Neumann series") {
    const MdpSpec mdp = random_mdp(4, 2, 6, 4);
    Rng rng(2);
    const SoftmaxTabularPolicy pi(4, 2, gaussian(rng, 8));
    const FeatureMap phi = FeatureMap::from_rows(4, 2, gaussian(rng, 8, 5));
    const DiscountedFit fit = discounted_fit(simulate(mdp, SoftmaxTabularPolicy(4, 2), 100, 5), pi, phi, 0.1, 0.8);
    const Matrix I = Matrix::Identity(5, 5);
    CHECK(((I - 0.8 * fit.M) * fit.w - fit.w_r).norm() <= 1e-9);
    for (std::size_t j = 0; j < fit.grad_w.size(); ++j)
        CHECK(((I - 0.8 * fit.M) * fit.grad_w[j] - 0.8 * fit.grad_M[j] * fit.w).norm() <= 1e-9);
    if (fit.spectral_radius < 0.95) {
        Vector series = Vector::Zero(5), term = fit.w_r;
        for (int n = 0; n < 200; ++n) {
            series += term;
            term = 0.8 * fit.M * term;
        }
        CHECK((series - fit.w).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("discounted: argument checks") {
    const MdpSpec mdp = random_mdp(2, 2, 3, 6);
    const SoftmaxTabularPolicy pi(2, 2);
    const Dataset data = simulate(mdp, pi, 10, 1);
    const FeatureMap phi = FeatureMap::one_hot(2, 2);
    CHECK_THROWS_AS(discounted_fit(data, pi, phi, 0.0, 1.0), InputError);
    CHECK_THROWS_AS(discounted_fit(data, pi, phi, 0.0, 0.0), InputError);
    CHECK_THROWS_AS(discounted_fit(data, pi, phi, -0.1, 0.9), InputError);
    // Features double along the only observed transition, so M = 2 and I - M / 2 = 0.
    const SoftmaxTabularPolicy one(2, 1);
    const FeatureMap doubling = FeatureMap::from_rows(2, 1, (Matrix(2, 1) << 1.0, 2.0).finished());
    const Dataset chain(1, {Episode{{Step{0, 0, 0.5, 1}}}});
    CHECK_THROWS_AS(discounted_fit(chain, one, doubling, 0.0, 0.5), NumericalError);
    CHECK_NOTHROW(discounted_fit(chain, one, doubling, 0.0, 0.4));
}

TEST_CASE("IS with behavior equal to target is REINFORCE") {
    const MdpSpec mdp = random_mdp(3, 2, 4, 7);
    Rng rng(3);
    const SoftmaxTabularPolicy pi(3, 2, gaussian(rng, 6));
    const Dataset data = simulate(mdp, pi, 100, 8);
    const ISEstimate is = is_estimate(data, pi, pi);
    CHECK(is.weights.min == 1.0);
    CHECK(is.weights.max == 1.0);
    CHECK(is.weights.ess == doctest::Approx(100.0));
    CHECK(is.estimate.grad == on_policy_reinforce(data, pi).grad);

    // On-policy GPOMDP by hand.
    const ISEstimate gp = gpomdp_estimate(data, pi, pi);
    Vector expected = Vector::Zero(6);
    for (const Episode& ep : data.episodes()) {
        Vector scores = Vector::Zero(6);
        for (int h = 0; h < 4; ++h) {
            scores += pi.score(h, ep.steps[h].s, ep.steps[h].a);
            expected += ep.steps[h].r * scores;
        }
    }
    expected /= 100.0;
    CHECK((gp.estimate.grad - expected).norm() <= 1e-12);
}

TEST_CASE("zero rewards give zero baseline estimates") {
    const MdpSpec mdp = random_mdp(3, 2, 3, 9);
    const SoftmaxTabularPolicy pi(3, 2, (Vector(6) << 1, 0, 0, 1, 1, 1).finished());
    const EpsilonGreedyWrapper behavior(borrow(pi), 0.4);
    const Dataset data = simulate(mdp, behavior, 30, 10).scale_rewards(0.0);
    CHECK(is_estimate(data, pi, behavior).estimate.grad.isZero(0.0));
    CHECK(gpomdp_estimate(data, pi, behavior).estimate.grad.isZero(0.0));
    CHECK(on_policy_reinforce(data, pi).grad.isZero(0.0));
}

TEST_CASE("GPOMDP equals IS at H = 1") {
    const MdpSpec mdp = random_mdp(3, 3, 1, 11);
    Rng rng(4);
    const SoftmaxTabularPolicy pi(3, 3, gaussian(rng, 9));
    const EpsilonGreedyWrapper behavior(borrow(pi), 0.5);
    const Dataset data = simulate(mdp, behavior, 40, 12);
    CHECK((is_estimate(data, pi, behavior).estimate.grad - gpomdp_estimate(data, pi, behavior).estimate.grad).norm() <=
          1e-14);
}

TEST_CASE("zero behavior probability names the record") {
    const MdpSpec mdp = random_mdp(2, 2, 2, 13);
    const SoftmaxTabularPolicy pi(2, 2);
    const DeterministicPolicy behavior(2, {0, 0});
    const Dataset data(2, {Episode{{Step{0, 0, 0.1, 1}, Step{1, 1, 0.2, 0}}}});
    try {
        is_estimate(data, pi, behavior);
        FAIL("expected InputError");
    } catch (const InputError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("k=0") != std::string::npos);
        CHECK(msg.find("h=2") != std::string::npos);
    }
    CHECK_THROWS_AS(gpomdp_estimate(data, pi, behavior), InputError);
}

TEST_CASE("weight overflow is clamped and flagged") {
    const int H = 1000;
    const MdpSpec mdp(1, 3, H, {1.0, 1.0, 1.0}, {1.0, 0.0, 0.0}, Vector::Ones(1));
    const SoftmaxTabularPolicy target(1, 3, (Vector(3) << 40.0, 0.0, 0.0).finished());
    const SoftmaxTabularPolicy behavior(1, 3);
    // log weight ~ H log 3 > 700.
    const Dataset data = simulate(mdp, target, 2, 1);
    const ISEstimate is = is_estimate(data, target, behavior);
    CHECK(is.weights.clamped);
    CHECK(is.estimate.grad.allFinite());
    CHECK_FALSE(is.estimate.warnings.empty());
    CHECK(gpomdp_estimate(data, target, behavior).weights.clamped);
}

TEST_CASE("baselines are unbiased") {
    const MdpSpec mdp = random_mdp(2, 2, 3, 14);
    const SoftmaxTabularPolicy pi(2, 2, (Vector(4) << 0.3, -0.6, 0.8, 0.1).finished());
    const EpsilonGreedyWrapper behavior(borrow(pi), 0.3);
    const Vector exact = exact_policy_gradient(mdp, pi);
    const int R = 2000;
    Matrix is(R, 4), gp(R, 4), rf(R, 4);
    for (int r = 0; r < R; ++r) {
        const Dataset off = simulate(mdp, behavior, 50, 1000 + r);
        is.row(r) = is_estimate(off, pi, behavior).estimate.grad.transpose();
        gp.row(r) = gpomdp_estimate(off, pi, behavior).estimate.grad.transpose();
        rf.row(r) = on_policy_reinforce(simulate(mdp, pi, 50, 5000 + r), pi).grad.transpose();
    }
    check_unbiased(is, exact);
    check_unbiased(gp, exact);
    check_unbiased(rf, exact);
}

TEST_CASE("ESS shrinks as the behavior moves away from the target") {
    const MdpSpec lake = frozenlake_like(1.0 / 3.0, 10);
    const auto target = softmax_of_optimal(lake, 5.0);
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : {0.1, 0.3, 0.5, 0.7}) {
        const EpsilonGreedyWrapper behavior(borrow(*target), eps);
        double ess = 0.0;
        for (std::uint64_t seed = 0; seed < 10; ++seed)
            ess += is_estimate(simulate(lake, behavior, 200, seed), *target, behavior).weights.ess;
        CHECK(ess < prev);
        prev = ess;
    }
}
