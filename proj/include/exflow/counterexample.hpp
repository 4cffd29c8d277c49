#pragma once
// The spiral-field counterexample machinery: the family psi_alpha, the
// double-log cutoff eta_k with its threshold k_alpha, closed-form integral
// identities, and the ratio scan that drives the quotient B above 1.
//
// Everything radial is computed in log coordinates s = log r (and
// xi = log s across the cutoff shell), because the cutoff's outer scale
// K = exp((log k)^2) overflows doubles long before the interesting alphas.

#include <cstdint>
#include <memory>
#include <vector>

#include "exflow/common.hpp"
#include "exflow/stream.hpp"

namespace exflow {

struct Deriv2 {
    double f = 0.0, d1 = 0.0, d2 = 0.0;
};

// C2 monotone ramp: 0 for t <= 0, 1 for t >= 1 (piecewise cubic, the
// antiderivative of a quadratic B-spline bump; max slope 2.25).
Deriv2 ramp01(double t);

// Inner collar profile: 0 on r <= 1.2, 1 on r >= 2.
Deriv2 collar_chi(double r);
// Outer profile in double-log time: 1 for s <= 1, 0 for s >= 2.
Deriv2 outer_eta(double s);

// Threshold scale 2^{1/(2(1-cos a))}; overflows to +inf below a ~ 0.031,
// so log_k_alpha is the authoritative representation.
double k_alpha(double alpha);
double log_k_alpha(double alpha);
// | quadrature of r^(-3+2cos a) over [1, k_alpha]  -  1/(4-4cos a) |.
double k_alpha_identity_residual(double alpha);

double psi_alpha(double alpha, double r, double theta);
// The untruncated spiral as a two-mode stream field (cos/sin of theta with
// r^(cos a) cos/sin(sin a log r) radial profiles).
StreamField psi_alpha_stream(double alpha);

struct AlphaField {
    double alpha = 0.0;
    double k = 0.0;      // +inf when not representable
    double log_k = 0.0;  // authoritative scale
    double log_K = 0.0;  // (log k)^2
    double C_eta = 0.0;  // measured cutoff constant (scan on r >= 2)

    // Cutoff value and scale-free derivatives at s = log r:
    // f = eta_k, d1 = r d_r eta_k, d2 = r^2 d_r^2 eta_k.
    Deriv2 eta_log(double s) const;
};

// Direct-radius cutoff evaluation (value and plain radial derivatives).
// Valid while r is representable; the integrals never use this path.
Deriv2 cutoff_eta(double k, double r);

// sup over r >= 2 of log log k * r log r * (|eta_k'| + r |eta_k''|),
// the measured constant of the cutoff gradient bound. On the inner collar
// no k-uniform constant exists (|grad eta_k| = |chi'| there while the
// bound's envelope shrinks with k), so the scan starts at 2.
double measured_cutoff_constant(double log_k);

// alpha in (0, 0.85]: beyond that k_alpha drops under e and the double-log
// profile loses its plateau. (The threshold k_alpha > e requires
// alpha < 0.896; k_alpha > e^e would need alpha < 0.509.)
AlphaField make_alpha_field(double alpha);

// Truncated spiral v_alpha sampled on a grid with analytic gradients
// (four-term product rule through complex radial profiles). The grid may
// stop far inside K; sampling is exact wherever the grid reaches.
VelocityFieldPolar build_valpha_on_grid(const AlphaField& af,
                                        std::shared_ptr<const PolarGrid> grid);

// Improper-integral verification of the closed forms for the untruncated
// field: gradient energy (= 4 pi) and the rotation pairing
// (= (mu/2pi) pi sin 2a / (2-2cos a)).
double grad_energy_ualpha(double alpha);
double pairing_ualpha(double alpha, double mu);

// Piecewise integrals of the truncated field, split as in the proof:
// collar [1.2, 2] by quadrature, plateau [2, k] by the exact
// antiderivative, cutoff shell [k, K] by quadrature in xi = log log r.
struct ValphaIntegrals {
    double h1sq = 0.0;       // ||grad v_alpha||^2
    double collar_h1 = 0.0;  // collar contribution to h1sq
    double pair_rot = 0.0;   // pairing against the mu = 2pi rotation
    double pair_flux = 0.0;  // pairing against the unit-flux carrier
    double I1 = 0.0;         // collar part of pair_rot
    double I2 = 0.0;         // plateau + shell part of pair_rot
    bool converged = true;
};
ValphaIntegrals valpha_integrals(const AlphaField& af);

struct RatioRow {
    double alpha = 0.0;
    double k = 0.0;
    double B = 0.0;
    double I1 = 0.0;
    double I2 = 0.0;
    double grad_energy = 0.0;
    double lower_bound = 0.0;
    bool converged = true;
};

// One row per alpha against the rotation of strength mu. lower_bound is
// the proof's closed form minus the measured collar and cutoff errors.
std::vector<RatioRow> ratio_scan(const std::vector<double>& alphas, double mu);
// Geometric descent in alpha from alpha0 until B >= target (witness hunt).
std::vector<RatioRow> ratio_descend(double alpha0, double mu, double target, int max_steps);
CsvTable ratio_scan_csv(const std::vector<RatioRow>& rows, double mu);

}  // namespace exflow
