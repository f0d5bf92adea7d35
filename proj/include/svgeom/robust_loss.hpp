#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace svgeom {

/// Shape/scale parameters of the general robust loss. alpha may be any real
/// or -infinity; the named limit branches keep evaluation defined everywhere.
struct RobustParams {
    double alpha = 1.0;
    double c = 0.1;
};

/// General robust penalty of a residual xi:
///   (|alpha-2|/alpha) * (((xi/c)^2/|alpha-2| + 1)^(alpha/2) - 1)
/// with the limit branches alpha=2 (quadratic), alpha=0 (Cauchy) and
/// alpha=-inf (Welsch).
inline double robust_loss(double xi, const RobustParams &p) {
    if (!(p.c > 0.0))
        throw std::invalid_argument("robust_loss: scale c must be positive");
    const double z2 = (xi / p.c) * (xi / p.c);
    if (p.alpha == 2.0)
        return 0.5 * z2;
    if (p.alpha == 0.0)
        return std::log1p(0.5 * z2);
    if (std::isinf(p.alpha) && p.alpha < 0.0)
        return -std::expm1(-0.5 * z2);
    const double b = std::abs(p.alpha - 2.0);
    // expm1/log1p keep precision for small residuals where the direct
    // pow(...) - 1 form cancels.
    return b / p.alpha * std::expm1(0.5 * p.alpha * std::log1p(z2 / b));
}

/// d/dxi of robust_loss: (xi/c^2) * ((xi/c)^2/|alpha-2| + 1)^(alpha/2 - 1),
/// which covers every branch (the alpha=0 and alpha=-inf limits included).
inline double robust_loss_grad(double xi, const RobustParams &p) {
    if (!(p.c > 0.0))
        throw std::invalid_argument("robust_loss: scale c must be positive");
    const double z2 = (xi / p.c) * (xi / p.c);
    const double base = xi / (p.c * p.c);
    if (p.alpha == 2.0)
        return base;
    if (std::isinf(p.alpha) && p.alpha < 0.0)
        return base * std::exp(-0.5 * z2);
    const double b = std::abs(p.alpha - 2.0);
    return base * std::pow(z2 / b + 1.0, 0.5 * p.alpha - 1.0);
}

/// Exhaustive grid search for the robust parameters minimizing a caller
/// objective (e.g. a validation loss over held-out residuals). Ties keep the
/// first candidate, so the result is deterministic.
template <typename Objective>
std::pair<RobustParams, double> fit_robust_params(const std::vector<double> &alphas,
                                                  const std::vector<double> &scales,
                                                  Objective &&objective) {
    if (alphas.empty() || scales.empty())
        throw std::invalid_argument("fit_robust_params: empty grid");
    RobustParams best;
    double best_value = std::numeric_limits<double>::infinity();
    bool first = true;
    for (double a : alphas) {
        for (double c : scales) {
            const RobustParams p{a, c};
            const double value = objective(p);
            if (first || value < best_value) {
                best = p;
                best_value = value;
                first = false;
            }
        }
    }
    return {best, best_value};
}

} // namespace svgeom
