#pragma once
// The explicit family of steady exterior flows: a radial source/sink of
// flux phi, a rotation of circulation mu, plus an amp-weighted swirl term
// whose radial growth rate depends on phi. Classification of their decay
// at infinity and the weighted sup functionals used by the smallness
// criteria.

#include <functional>

#include "exflow/geometry.hpp"

namespace exflow {

struct SteadyFlowParams {
    double phi = 0.0;  // flux through the obstacle boundary
    double mu = 0.0;   // rotation strength
    double amp = 0.0;  // amplitude of the growing swirl component
};

// Polar velocity components (u_r, u_theta); the field is axisymmetric.
struct PolarVec {
    double r = 0.0;
    double t = 0.0;
};

PolarVec hamel_velocity(const SteadyFlowParams& p, double r);

// Velocity gradient in the polar frame at radius r. Component (i, j) is
// the frame-covariant derivative (row = component, column = direction):
//   [ du_r/dr          (1/r) du_r/dtheta - u_t/r ]
//   [ du_t/dr          (1/r) du_t/dtheta + u_r/r ]
struct PolarMat {
    double rr = 0.0, rt = 0.0, tr = 0.0, tt = 0.0;
};

PolarMat hamel_gradient(const SteadyFlowParams& p, double r);

// The swirl profile gamma(r) and its derivative: r^(1+phi/2pi) generically,
// log(r)/r at the resonant flux phi = -4pi (relative tolerance 1e-12).
double hamel_gamma(double phi, double r);
double hamel_gamma_prime(double phi, double r);

enum class DecayTag { subcritical, critical, supercritical };

struct DecayClass {
    DecayTag tag = DecayTag::critical;
    // Set when the profile decays strictly faster than 1/r in power but
    // carries no uniform r log r bound (the resonant-window gap).
    bool log_gap = false;
};

DecayClass classify_decay(const SteadyFlowParams& p);

// A radial decay profile with its asymptotic envelope |u| ~ r^(-p) log(r)^q.
struct RadialEnvelope {
    std::function<double(double)> magnitude;  // |u|(r) on r >= 1
    double power = 1.0;                       // p
    double log_power = 0.0;                   // q
};

RadialEnvelope hamel_envelope(const SteadyFlowParams& p);

struct WeightedSup {
    double value = 0.0;
    bool divergent = false;
};

// sup over r >= 1 of weight(r) |u|(r), scanning grid nodes plus a dyadic
// tail; divergence is decided from the envelope exponents.
// Subcritical weight: r log r. Critical weight: r.
WeightedSup weighted_sup_subcritical(const RadialEnvelope& u, const PolarGrid& grid);
WeightedSup weighted_sup_critical(const RadialEnvelope& u, const PolarGrid& grid);

}  // namespace exflow
