#pragma once
// Spectral Galerkin integration of the perturbation system on a truncated
// annulus. Modes are stream functions: Fourier in theta times clamped cubic
// B-spline shapes whose value and slope vanish at r = 1 and r = r_max, so
// every basis field is divergence-free with no-slip at both radii. The
// evolution runs in raw spline coefficients against the L2 mass matrix;
// compact mode supports keep the nonlinear term cheap, and an explicit
// whitening transform exposes the H1-orthonormalized view when needed.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "exflow/common.hpp"
#include "exflow/geometry.hpp"
#include "exflow/steady.hpp"
#include "exflow/stream.hpp"

namespace exflow {

struct GalerkinBasis {
    std::shared_ptr<const PolarGrid> grid;
    std::vector<StreamMode> modes;           // generating stream modes
    std::vector<VelocityFieldPolar> fields;  // sampled with analytic gradients
    std::vector<int> mval;                   // angular frequency per mode
    std::vector<int> trig;                   // 0 = cos, 1 = sin
    // Radial node index range [lo, hi) covering each mode's support.
    std::vector<std::size_t> support_lo, support_hi;
    Eigen::MatrixXd gram;  // H1 Gram matrix of the modes

    std::size_t n() const { return fields.size(); }
    VelocityFieldPolar reconstruct(const Eigen::VectorXd& c) const;
    // H1-orthogonal projection of a sampled field (gradient channel needed).
    Eigen::VectorXd project(const VelocityFieldPolar& v) const;
    // Equivalent basis with H1-orthonormal modes (gram = identity). Dense
    // radial supports; meant for inspection and tests, not the time loop.
    GalerkinBasis orthonormalized() const;
    bool centrally_symmetric() const;  // all modes even in m
};

// Fourier modes m = 0..n_modes_theta, each with n_modes_radial B-spline
// shapes whose knots sit on grid panel edges (panel count must be at least
// n_modes_radial + 1; spline segments stride the panels evenly).
GalerkinBasis build_galerkin_basis(std::shared_ptr<const PolarGrid> grid, int n_modes_theta,
                                   int n_modes_radial);
// Sub-basis of centrally symmetric modes (even m).
GalerkinBasis restrict_central(const GalerkinBasis& basis);
// Sub-basis carrying a single angular frequency.
GalerkinBasis restrict_mode(const GalerkinBasis& basis, int m);

// A priori monitoring constant: 0 for the zero background, |phi|/2pi for a
// pure flux carrier, otherwise -1 (no criterion available).
double criterion_delta_hat(const SteadyFlowParams& ubar);

struct GalerkinSystem {
    std::shared_ptr<const GalerkinBasis> basis;
    SteadyFlowParams ubar;
    Eigen::MatrixXd M;   // L2 mass
    Eigen::MatrixXd A;   // H1 stiffness
    Eigen::MatrixXd B1;  // (ubar.grad phi_j, phi_i), antisymmetrized
    Eigen::MatrixXd B2;  // (phi_j.grad ubar, phi_i)
    Eigen::MatrixXd B2s; // independently assembled (phi_i.grad ubar, phi_j)
    double b1_skew_defect = 0.0;  // max |B1 + B1^T| entry before antisymmetrization
    double delta_monitor = -1.0;  // criterion_delta_hat(ubar)

    Eigen::MatrixXd K() const { return A + B1 + B2; }             // a_L
    Eigen::MatrixXd K_star() const { return A - B1 + B2s; }       // a_{L*}
    // Antisymmetrized Galerkin nonlinear term N_i = (v.grad v, phi_i).
    Eigen::VectorXd nonlinear(const Eigen::VectorXd& c) const;
    double energy(const Eigen::VectorXd& c) const;     // ||v||_2^2
    double h1sq(const Eigen::VectorXd& c) const;       // ||grad v||_2^2
};

GalerkinSystem assemble_system(std::shared_ptr<const GalerkinBasis> basis,
                               const SteadyFlowParams& ubar);

enum class Scheme { implicit_midpoint, imex_cn_ab2 };
Scheme scheme_from_name(const std::string& name);
std::string scheme_name(Scheme s);

struct SpectralState {
    Eigen::VectorXd xi;
    double t = 0.0;
    Eigen::VectorXd prev_rhs;  // explicit-term history for imex_cn_ab2
};

// One step of M xi' = -(A + B1 + B2) xi - N(xi). Midpoint solves the
// nonlinear stage by fixed point (throws after 50 iterations); imex treats
// diffusion by Crank-Nicolson and advection + nonlinearity by AB2.
SpectralState step(const GalerkinSystem& sys, const SpectralState& state, double dt,
                   Scheme scheme = Scheme::implicit_midpoint);

struct EnergyTrace {
    std::vector<double> t;
    std::vector<double> energy;       // ||v(t)||_2^2
    std::vector<double> dissipation;  // cumulative integral of ||grad v||^2
    std::vector<double> residual;     // per-step energy-inequality slack
    std::vector<double> grad_norm;    // ||grad v(t)||_2
    double delta_monitor = -1.0;
    bool delta_warning = false;
    double max_cancellation = 0.0;    // max |(v.grad v, v)| / ||grad v||^2
    double max_central_defect = -1.0; // tracked on central runs
    CsvTable to_csv() const;          // t, energy, dissipation, residual
};

struct SimulateOptions {
    double r_max = 8.0;
    int n_modes_theta = 6;
    int n_modes_radial = 12;
    double dt = 0.02;
    Scheme scheme = Scheme::implicit_midpoint;
    bool central = false;
    std::uint64_t seed = 1;  // only stamps the trace; the caller draws v0
};

EnergyTrace simulate(const StreamField& v0, const SteadyFlowParams& ubar, double T,
                     const SimulateOptions& opts);

// Core loop against a prebuilt system, for callers that need the system and
// initial coefficients afterwards (decay certificates, semigroup
// comparisons). The central-symmetry defect is tracked whenever the basis
// is centrally symmetric. simulate() is a thin wrapper over this.
EnergyTrace simulate_system(const GalerkinSystem& sys, const Eigen::VectorXd& xi0, double T,
                            double dt, Scheme scheme = Scheme::implicit_midpoint);

enum class Generator { L, L_star };

// e^{-t L} v0 (or the adjoint) through the linear Galerkin flow; the matrix
// exponential is taken per angular-frequency block.
Eigen::VectorXd semigroup_apply_coeffs(const GalerkinSystem& sys, const Eigen::VectorXd& c0,
                                       double t, Generator which);
VelocityFieldPolar semigroup_apply(const GalerkinSystem& sys, const VelocityFieldPolar& v0,
                                   double t, Generator which);

// Least-squares slope of log ||grad e^{-tL*}||_{L2->H1-op} against log t:
// per time, the operator norm sup_v0 ||grad e^{-tL*} v0|| / ||v0||_2 via a
// generalized eigenproblem.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<double> t, value;
};
SlopeFit semigroup_gradient_slope(const GalerkinSystem& sys, const std::vector<double>& ts);

// Running average t -> (1/t) int_0^t ||v(s)||_2 ds over the trace samples
// (trapezoid); entry 0 is the t -> 0 limit ||v(0)||.
std::vector<double> cesaro_average(const EnergyTrace& trace);

// Max over random draws of |(v.grad v, e^{-tL*} w)| * sqrt(t) /
// (||v|| ||grad v|| ||w||): the fitted constant of the nonlinear bound.
double measure_nonlinear_bound(const GalerkinSystem& sys, int n_samples,
                               const std::vector<double>& ts, std::uint64_t seed);

}  // namespace exflow
