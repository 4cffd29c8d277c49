#pragma once
// Discretization of the exterior annulus 1 <= r <= r_max: tensor-product
// polar grids whose radial direction is a composite Gauss rule (so smooth
// radial integrands integrate to near machine precision), dyadic shell
// decompositions, and a text serialization for grids.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace exflow {

enum class Stretch { uniform, geometric, algebraic };

std::string stretch_name(Stretch s);
Stretch stretch_from_name(const std::string& name);

// Polar quadrature grid on the annulus [1, r_max] x [0, 2pi).
// Radial nodes are Gauss points of order q on each panel; radial weights
// absorb the area measure r dr. Angular nodes are equispaced (trapezoid
// rule, exact for trigonometric polynomials of degree < n_theta).
struct PolarGrid {
    double r_max = 2.0;
    int q = 4;
    Stretch stretch = Stretch::uniform;
    std::vector<double> panels;  // radial panel boundaries, panels.front()=1
    std::vector<double> r;       // all radial nodes, ascending
    std::vector<double> wr;      // radial weights including the r factor
    std::vector<double> theta;   // angular nodes
    double wtheta = 0.0;         // angular weight 2pi/n_theta

    std::size_t n_r() const { return r.size(); }
    std::size_t n_theta() const { return theta.size(); }
    std::size_t n_nodes() const { return r.size() * theta.size(); }
    // Flattened node index: radial-major.
    double node_r(std::size_t idx) const { return r[idx / theta.size()]; }
    double node_theta(std::size_t idx) const { return theta[idx % theta.size()]; }
    double node_weight(std::size_t idx) const { return wr[idx / theta.size()] * wtheta; }
    // Index of the angular node diametrically opposite j (exact: n_theta even).
    std::size_t antipode(std::size_t j) const { return (j + theta.size() / 2) % theta.size(); }
    double total_weight() const;
    // Nearest panel boundary to x (used to snap compact supports onto panel
    // edges so panel-wise Gauss rules see smooth integrands only).
    double snap_to_panel(double x) const;
};

// n_r is rounded up to a multiple of q; n_theta must be even and >= 4.
PolarGrid build_polar_grid(double r_max, std::size_t n_r, std::size_t n_theta,
                           Stretch stretch = Stretch::uniform, int q = 4);

// Flattened copy of a grid's nodes for generic consumers.
struct QuadratureRule {
    std::vector<double> r, theta, w;
    std::string domain;  // e.g. "annulus r in [1,64]"
    double total_weight() const;
};
QuadratureRule quadrature_rule(const PolarGrid& grid);

// Sum of w(i,j) f(r_i, theta_j) over the grid (deterministic reduction).
double integrate_grid(const PolarGrid& grid, const std::function<double(double, double)>& f);
// Radial-only helper: sum of wr_i g(r_i); multiply by 2*pi for an
// axisymmetric area integral.
double integrate_radial(const PolarGrid& grid, const std::function<double(double)>& g);

// Dyadic shells around the obstacle: S_0 = (1, R), S_j = (2^(j-1) R, 2^j R)
// for j = 1..count. With R = 1 the collar shell S_0 is empty.
struct ShellDecomposition {
    double R = 1.0;
    int count = 0;
    struct Shell {
        double lo, hi;
    };
    Shell shell(int j) const;
    // Index of the shell containing r, or -1 outside (1, R 2^count].
    int shell_of(double r) const;
    double outer_radius() const;
};
ShellDecomposition build_shells(double R, int count);

// Text serialization: "# exflow polar-grid v1" header, key=value metadata,
// then one "r,theta,weight" row per node (shortest round-trip decimals:
// r and theta reload bitwise, node weights to within one ulp of the
// radial/angular factorization). load rebuilds from metadata and checks
// the stored rows against the rebuilt grid (1e-14 relative), keeping the
// stored values as authoritative.
void save_grid(const PolarGrid& grid, const std::string& path);
PolarGrid load_grid(const std::string& path);

}  // namespace exflow
