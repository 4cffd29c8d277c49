#pragma once
// 1-D quadrature: Gauss-Legendre point sets, fixed panel rules, an adaptive
// integrator that accepts interior breakpoints, and an improper integrator
// for tails with a known power-law decay hint.

#include <functional>
#include <vector>

namespace exflow {

struct GaussRule {
    std::vector<double> x;  // nodes in (-1, 1)
    std::vector<double> w;  // weights, sum = 2
};

// Nodes/weights via Newton iteration on P_n; cached per order.
const GaussRule& gauss_legendre(int n);

using Fn1D = std::function<double(double)>;

// Fixed Gauss rule of order q applied on each panel [pts[i], pts[i+1]].
double integrate_panels(const Fn1D& f, const std::vector<double>& pts, int q);

struct AdaptiveResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool converged = true;
};

// Adaptive panel bisection on [a, b] with user breakpoints inserted as
// initial panel boundaries (integrand may be non-smooth there). Absolute
// tolerance; error estimate from G(q) vs two-half refinement per panel.
AdaptiveResult integrate_adaptive(const Fn1D& f, double a, double b, double tol,
                                  const std::vector<double>& breakpoints = {}, int q = 7,
                                  int max_depth = 40);

struct ImproperResult {
    double value = 0.0;
    double error_estimate = 0.0;
    bool divergent = false;
    int panels_used = 0;
};

// Integral of f over [r0, inf) for f ~ a r^hint (1 + O(1/r)) at infinity.
// Dyadic panels [r0 2^j, r0 2^(j+1)] are accumulated until the two-term
// Richardson tail model stabilizes; the tail closes the integral. A hint
// >= -1 means the tail diverges: the result is flagged and carries no value.
ImproperResult improper_radial_integral(const Fn1D& f, double r0, double decay_hint,
                                        double rel_tol = 1e-10);

}  // namespace exflow
