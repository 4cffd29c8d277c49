#pragma once
// Divergence-free test fields built from stream functions: a field is a sum
// of Fourier modes in theta with smooth compactly supported radial profiles.
// Velocities and polar-frame gradients come from the analytic mode formulas,
// so every generated field is exactly divergence-free and traceless in the
// gradient's frame sense.

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "exflow/geometry.hpp"
#include "exflow/steady.hpp"

namespace exflow {

struct RadialProfile {
    std::function<double(double)> f;   // profile value
    std::function<double(double)> d1;  // first derivative
    std::function<double(double)> d2;  // second derivative
    double lo = 1.0;                   // support (f and derivatives vanish outside)
    double hi = 1e300;
};

// Degree-6 polynomial bump 64 (t(1-t))^3 mapped onto [a, b]; vanishes with
// two derivatives at both ends, peak value 1 at the midpoint.
RadialProfile poly_bump(double a, double b);

// One cubic B-spline over a padded knot vector (Cox-de Boor), supported on
// [knots[j], knots[j+4]]. Shared knot storage keeps profile copies cheap.
RadialProfile bspline_profile(std::shared_ptr<const std::vector<double>> knots, std::size_t j);

struct StreamMode {
    int m = 0;
    bool is_sin = false;  // cos(m theta) if false, sin(m theta) if true
    double amp = 1.0;
    RadialProfile prof;
};

struct FieldSample {
    PolarVec v;
    PolarMat g;
};

class StreamField {
public:
    std::vector<StreamMode> modes;

    double psi(double r, double theta) const;
    PolarVec velocity(double r, double theta) const;
    FieldSample sample(double r, double theta) const;
    int max_mode() const;
    bool centrally_symmetric() const;  // all modes even in m
    StreamField central_part() const;
    // Support hull over modes (profiles with unbounded support dominate).
    double support_lo() const;
    double support_hi() const;
};

struct RandomFieldParams {
    int n_modes = 4;
    int m_max = 6;
    double r_lo = 1.0;        // supports drawn inside [r_lo, r_hi]
    double r_hi = 0.0;        // 0 means grid r_max
    bool central_only = false;
};

// Band-limited random field. Profile supports are snapped to panel
// boundaries of the grid so panel-wise Gauss rules see polynomial pieces
// only. Driven by a substream so field #i is independent of how many other
// fields are drawn.
StreamField random_stream_field(std::uint64_t seed, std::uint64_t index, const PolarGrid& grid,
                                const RandomFieldParams& params);

// Grid samples of a velocity field, with optional gradient channel.
class VelocityFieldPolar {
public:
    std::shared_ptr<const PolarGrid> grid;
    std::vector<double> vr, vt;
    std::vector<double> grr, grt, gtr, gtt;
    bool has_gradient() const { return !grr.empty(); }
    std::size_t n_nodes() const { return vr.size(); }
};

// Sample a stream field on a grid (analytic gradients). Fails if the field
// carries an angular mode at or beyond the grid Nyquist limit.
VelocityFieldPolar stream_to_velocity(const StreamField& psi,
                                      std::shared_ptr<const PolarGrid> grid);

// Fill the gradient channel of a sampled field by finite differences:
// Fornberg stencils (width 5) radially, 4th-order central differences in
// theta. For fields whose analytic gradient is unavailable.
void gradient_from_samples(VelocityFieldPolar& field);

// Finite-difference weights for the k-th derivative at x0 from arbitrary
// nodes xs (Fornberg's recursion).
std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int k);

// Central-symmetry projector: averages each polar component with its value
// at the antipodal node. Idempotent bitwise (paired nodes are exact for
// even n_theta). Acts on values and, if present, gradients.
VelocityFieldPolar project_central(const VelocityFieldPolar& v);
// max over nodes/components of |v - Pv|.
double central_defect(const VelocityFieldPolar& v);

}  // namespace exflow
