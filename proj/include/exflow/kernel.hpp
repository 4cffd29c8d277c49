#pragma once
// The averaging functional I(t) = (1/t) int_0^t int_0^s (s-tau)^(-1/2)
// f(tau) dtau ds for nonnegative square-integrable f, its interchanged
// single-integral form, and the chi_t pairing t^(-1/2) int_0^t f. These
// replace spectral decomposition in the long-time decay argument: if f is
// in L2 then I(t) -> 0, and the energy trace of a run feeds in as f.

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <vector>

#include "exflow/common.hpp"
#include "exflow/evolution.hpp"

namespace exflow {

struct KernelProbe {
    std::function<double(double)> f;  // nonnegative on [0, inf)
    bool square_integrable = true;
    // f may kink or jump at these times; quadrature panels split there.
    std::vector<double> breakpoints;
    // f vanishes beyond support_hi (infinity for unbounded tails).
    double support_hi = std::numeric_limits<double>::infinity();
    // Power-law hint f ~ t^tail_hint for the improper L2-norm integral
    // (only consulted when support_hi is infinite).
    double tail_hint = -1.0;
    std::vector<double> t_grid;  // default evaluation times
};

// f = indicator of [0, 1]: the closed-form calibration probe.
KernelProbe step_probe();
// f(tau) = 1 / (1 + tau): square integrable with a slow tail.
KernelProbe smooth_decay_probe();
// f = piecewise-linear interpolant of the gradient-norm history of a run
// (subsampled to at most 256 nodes, zero beyond the horizon). Throws if the
// trace carries no gradient samples.
KernelProbe trace_probe(const EnergyTrace& trace);

struct KernelAverage {
    double single_form = 0.0;  // (2/t) int_0^t (t-tau)^(1/2) f dtau
    double double_form = 0.0;  // (1/t) int_0^t int_0^s (s-tau)^(-1/2) f dtau ds
};

// Both forms of I(t); no agreement check.
KernelAverage kernel_average_forms(const KernelProbe& probe, double t);

// I(t) via the single-integral form, with the double integral recomputed as
// a consistency check. Throws if the two disagree beyond 1e-6 relative.
double kernel_average(const KernelProbe& probe, double t);

// ||chi_t f||_1 = t^(-1/2) int_0^t f.
double chi_pairing(const KernelProbe& probe, double t);

// ||f||_{L2(0, inf)}; unbounded supports close with the dyadic tail
// integrator under the probe's decay hint.
double probe_l2_norm(const KernelProbe& probe);

// The inner Abel integral int_0^s (s-tau)^(-1/2) f(tau) dtau.
double abel_integral(const KernelProbe& probe, double s);

// Rows (t, I_double, I_single, chi_pairing, bound_2norm) over probe.t_grid,
// where bound_2norm = 2 ||f||_2 dominates both I and 2 ||chi_t f||_1.
CsvTable kernel_csv(const KernelProbe& probe);

// Numerical assembly of the decay chain for a finished run: at sampled s,
//   ||v(s)|| <= ||e^{-sL} v0|| + C ||v0|| int_0^s (s-tau)^(-1/2) ||grad v|| dtau,
// together with the running average of ||v|| whose decay the chain forces.
// C comes from measure_nonlinear_bound.
struct DecayCertificate {
    std::vector<double> s;
    std::vector<double> lhs;             // ||v(s)||
    std::vector<double> semigroup_term;  // ||e^{-sL} v0||
    std::vector<double> kernel_term;     // C ||v0|| * Abel integral
    std::vector<double> cesaro;          // running average of ||v||
    double C = 0.0;
    bool dominated = true;     // lhs <= semigroup + kernel at every sample
    double cesaro_ratio = 1.0; // average at T over average at T/10
    CsvTable to_csv() const;   // s, lhs, semigroup_term, kernel_term, cesaro
};

DecayCertificate decay_certificate(const EnergyTrace& trace, const GalerkinSystem& sys,
                                   const Eigen::VectorXd& xi0, double C);

}  // namespace exflow
