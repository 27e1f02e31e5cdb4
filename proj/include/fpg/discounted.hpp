#pragma once

#include <string>
#include <vector>

#include "fpg/fpg.hpp"

namespace fpg {

/// Time-homogeneous discounted FPG. All statistics are pooled over steps and
/// episodes with 1/(HK) normalization, including the ridge term:
///   Sigma = (lambda I + sum_{k,h} phi phi^T) / (HK).
/// The fitted weights solve the resolvent systems
///   (I - gamma M) w        = w_r
///   (I - gamma M) grad_w_j = gamma grad_M_j w.
struct DiscountedFit {
    double gamma = 0.0;
    Vector w_r;
    Matrix M;
    std::vector<Matrix> grad_M;
    Vector w;
    std::vector<Vector> grad_w;
    double spectral_radius = 0.0;  // of gamma * M
    std::vector<std::string> warnings;
};

/// Throws InputError unless gamma is in (0, 1); gamma <= 1/2 only warns.
/// Throws NumericalError when I - gamma M is numerically singular.
DiscountedFit discounted_fit(const Dataset& data, const Policy& target, const FeatureMap& phi, double lambda,
                             double gamma);

GradientEstimate discounted_fpg_estimate(const DiscountedFit& fit, const Policy& target, const FeatureMap& phi,
                                         const Vector& xi);

}  // namespace fpg
