#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "exflow/functionals.hpp"
#include "exflow/stream.hpp"

using namespace exflow;

namespace {

std::shared_ptr<const PolarGrid> make_grid(double r_max, int n_r, int n_theta,
                                           Stretch s = Stretch::geometric) {
    return std::make_shared<PolarGrid>(build_polar_grid(r_max, n_r, n_theta, s));
}

// Analytic divergence of a sampled mode field via the mode formulas:
// div = g_rr + v_r/r + g_tt evaluates the conservative polar divergence.
double max_divergence(const VelocityFieldPolar& f) {
    double worst = 0.0;
    for (std::size_t i = 0; i < f.n_nodes(); ++i) {
        // trace in the polar frame: g_rr + g_tt already carries v_r/r
        worst = std::max(worst, std::abs(f.grr[i] + f.gtt[i]));
    }
    return worst;
}

}  // namespace

TEST_CASE("poly_bump is a C2 bump with unit peak") {
    RadialProfile b = poly_bump(2.0, 4.0);
    CHECK(b.lo == 2.0);
    CHECK(b.hi == 4.0);
    CHECK(b.f(3.0) == doctest::Approx(1.0));
    CHECK(std::abs(b.d1(3.0)) < 1e-15);
    for (double r : {1.5, 2.0, 4.0, 5.1}) {
        CHECK(b.f(r) == 0.0);
        CHECK(b.d1(r) == 0.0);
        CHECK(b.d2(r) == 0.0);
    }
    // Touchdown is C2: values just inside the support edge are tiny.
    CHECK(std::abs(b.f(2.0 + 1e-5)) < 1e-13);
    CHECK(std::abs(b.d1(2.0 + 1e-5)) < 1e-8);
    // Derivatives agree with finite differences mid-support.
    const double h = 1e-6;
    CHECK(b.d1(2.7) == doctest::Approx((b.f(2.7 + h) - b.f(2.7 - h)) / (2 * h)).epsilon(1e-7));
    CHECK(b.d2(2.7) == doctest::Approx((b.d1(2.7 + h) - b.d1(2.7 - h)) / (2 * h)).epsilon(1e-7));
}

TEST_CASE("mode fields are divergence-free and match finite differences of psi") {
    StreamField psi;
    psi.modes.push_back({2, false, 0.7, poly_bump(1.5, 3.0)});
    psi.modes.push_back({3, true, -0.4, poly_bump(2.0, 5.0)});

    auto grid = make_grid(6.0, 32, 64);
    VelocityFieldPolar f = stream_to_velocity(psi, grid);
    REQUIRE(f.has_gradient());
    CHECK(max_divergence(f) < 1e-13);

    // v_r = (1/r) dpsi/dtheta, v_t = -dpsi/dr at a few probe points.
    const double h = 1e-6;
    for (double r : {1.8, 2.6, 4.0}) {
        for (double th : {0.3, 2.0}) {
            PolarVec v = psi.velocity(r, th);
            const double dth = (psi.psi(r, th + h) - psi.psi(r, th - h)) / (2 * h);
            const double dr = (psi.psi(r + h, th) - psi.psi(r - h, th)) / (2 * h);
            CHECK(v.r == doctest::Approx(dth / r).epsilon(1e-7));
            CHECK(v.t == doctest::Approx(-dr).epsilon(1e-7));
        }
    }

    // Gradient entries against finite differences of the velocity.
    const double r = 2.4, th = 1.1;
    FieldSample s = psi.sample(r, th);
    auto vr = [&](double rr, double tt) { return psi.velocity(rr, tt).r; };
    auto vt = [&](double rr, double tt) { return psi.velocity(rr, tt).t; };
    CHECK(s.g.rr == doctest::Approx((vr(r + h, th) - vr(r - h, th)) / (2 * h)).epsilon(1e-6));
    CHECK(s.g.tr == doctest::Approx((vt(r + h, th) - vt(r - h, th)) / (2 * h)).epsilon(1e-6));
    CHECK(s.g.rt ==
          doctest::Approx((vr(r, th + h) - vr(r, th - h)) / (2 * h) / r - s.v.t / r).epsilon(1e-6));
    CHECK(s.g.tt ==
          doctest::Approx((vt(r, th + h) - vt(r, th - h)) / (2 * h) / r + s.v.r / r).epsilon(1e-6));
}

TEST_CASE("stream_to_velocity rejects modes at the grid Nyquist limit") {
    StreamField psi;
    psi.modes.push_back({8, false, 1.0, poly_bump(2.0, 3.0)});
    CHECK_THROWS_AS(stream_to_velocity(psi, make_grid(4.0, 16, 16)), std::invalid_argument);
    CHECK_NOTHROW(stream_to_velocity(psi, make_grid(4.0, 16, 64)));
}

TEST_CASE("random fields are reproducible, independent of draw count, and supported away from the boundary") {
    auto grid = make_grid(8.0, 48, 64);
    RandomFieldParams p;
    p.r_lo = 1.2;
    StreamField a = random_stream_field(7, 3, *grid, p);
    StreamField b = random_stream_field(7, 3, *grid, p);
    REQUIRE(a.modes.size() == b.modes.size());
    for (std::size_t i = 0; i < a.modes.size(); ++i) {
        CHECK(a.modes[i].m == b.modes[i].m);
        CHECK(a.modes[i].amp == b.modes[i].amp);
        CHECK(a.modes[i].prof.lo == b.modes[i].prof.lo);
        CHECK(a.modes[i].prof.hi == b.modes[i].prof.hi);
    }
    StreamField c = random_stream_field(7, 4, *grid, p);
    bool differs = c.modes.size() != a.modes.size();
    for (std::size_t i = 0; !differs && i < a.modes.size(); ++i)
        differs = c.modes[i].amp != a.modes[i].amp || c.modes[i].m != a.modes[i].m;
    CHECK(differs);

    CHECK(a.support_lo() >= 1.2);
    CHECK(a.support_hi() <= 8.0);
    CHECK(a.max_mode() <= p.m_max);
    // Supports sit on panel edges: velocity vanishes identically on the collar.
    VelocityFieldPolar f = stream_to_velocity(a, grid);
    for (std::size_t i = 0; i < f.n_nodes(); ++i) {
        if (grid->node_r(i) < a.support_lo())
            CHECK(std::abs(f.vr[i]) + std::abs(f.vt[i]) == 0.0);
    }
}

TEST_CASE("central-only random fields have even modes and zero defect") {
    auto grid = make_grid(8.0, 32, 64);
    RandomFieldParams p;
    p.central_only = true;
    StreamField a = random_stream_field(11, 0, *grid, p);
    CHECK(a.centrally_symmetric());
    VelocityFieldPolar f = stream_to_velocity(a, grid);
    CHECK(central_defect(f) < 1e-13);
}

TEST_CASE("finite-difference gradients converge to the analytic channel") {
    // A C-infinity profile: poly_bump's third derivative jumps at the
    // support edges, which would cap the observable stencil order there.
    RadialProfile gauss;
    gauss.lo = 1.0;
    gauss.hi = 4.0;
    gauss.f = [](double r) {
        const double s = (r - 2.5) / 0.35;
        return std::exp(-s * s);
    };
    gauss.d1 = [](double r) {
        const double s = (r - 2.5) / 0.35;
        return -2.0 * s / 0.35 * std::exp(-s * s);
    };
    gauss.d2 = [](double r) {
        const double s = (r - 2.5) / 0.35;
        return (4.0 * s * s - 2.0) / (0.35 * 0.35) * std::exp(-s * s);
    };
    StreamField psi;
    psi.modes.push_back({2, true, 1.0, gauss});
    auto err_at = [&](std::size_t nr, std::size_t ntheta) {
        auto g = make_grid(4.0, nr, ntheta, Stretch::uniform);
        VelocityFieldPolar exact = stream_to_velocity(psi, g);
        VelocityFieldPolar fd = exact;
        fd.grr.clear();
        fd.grt.clear();
        fd.gtr.clear();
        fd.gtt.clear();
        gradient_from_samples(fd);
        REQUIRE(fd.has_gradient());
        double scale = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < exact.n_nodes(); ++i) {
            scale = std::max({scale, std::abs(exact.grr[i]), std::abs(exact.gtr[i])});
            worst = std::max({worst, std::abs(exact.grr[i] - fd.grr[i]),
                              std::abs(exact.grt[i] - fd.grt[i]),
                              std::abs(exact.gtr[i] - fd.gtr[i]),
                              std::abs(exact.gtt[i] - fd.gtt[i])});
        }
        return worst / scale;
    };
    // 4th-order stencils: halving both spacings should cut the error by
    // about 16; require at least 8 to leave room for the seam stencils.
    const double coarse = err_at(96, 128);
    const double fine = err_at(192, 256);
    CHECK(coarse < 5e-3);
    CHECK(fine < coarse / 8.0);
}

TEST_CASE("fd_weights reproduce classic stencils") {
    // Central 3-point second derivative on unit spacing: 1 -2 1.
    auto w = fd_weights(0.0, {-1.0, 0.0, 1.0}, 2);
    CHECK(w[0] == doctest::Approx(1.0));
    CHECK(w[1] == doctest::Approx(-2.0));
    CHECK(w[2] == doctest::Approx(1.0));
    // One-sided first derivative, 3 points: -3/2 2 -1/2.
    auto o = fd_weights(0.0, {0.0, 1.0, 2.0}, 1);
    CHECK(o[0] == doctest::Approx(-1.5));
    CHECK(o[1] == doctest::Approx(2.0));
    CHECK(o[2] == doctest::Approx(-0.5));
    // Exactness on a cubic at irregular nodes.
    std::vector<double> xs = {-0.7, -0.1, 0.4, 1.3, 2.2};
    auto c = fd_weights(0.5, xs, 1);
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) d += c[i] * (xs[i] * xs[i] * xs[i]);
    CHECK(d == doctest::Approx(3 * 0.25));
}

TEST_CASE("central projector averages antipodes and is idempotent bitwise") {
    auto grid = make_grid(6.0, 32, 64);
    StreamField psi;
    psi.modes.push_back({1, false, 1.0, poly_bump(1.5, 4.0)});   // odd: killed
    psi.modes.push_back({2, true, 0.5, poly_bump(2.0, 5.0)});    // even: kept
    psi.modes.push_back({3, true, -0.8, poly_bump(1.5, 3.0)});   // odd: killed
    VelocityFieldPolar f = stream_to_velocity(psi, grid);
    CHECK(central_defect(f) > 1e-3);

    VelocityFieldPolar pf = project_central(f);
    CHECK(central_defect(pf) < 1e-14);
    VelocityFieldPolar ppf = project_central(pf);
    for (std::size_t i = 0; i < pf.n_nodes(); ++i) {
        CHECK(pf.vr[i] == ppf.vr[i]);
        CHECK(pf.vt[i] == ppf.vt[i]);
        CHECK(pf.grr[i] == ppf.grr[i]);
    }

    // The projector agrees with sampling the even part of the stream field.
    StreamField even = psi.central_part();
    CHECK(even.modes.size() == 1);
    VelocityFieldPolar g = stream_to_velocity(even, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.n_nodes(); ++i)
        worst = std::max({worst, std::abs(g.vr[i] - pf.vr[i]), std::abs(g.vt[i] - pf.vt[i])});
    CHECK(worst < 1e-13);
}
