#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "exflow/geometry.hpp"

using namespace exflow;

TEST_CASE("grid weights are positive and sum to the annulus area") {
    PolarGrid g = build_polar_grid(2.0, 8, 4, Stretch::uniform);
    for (double w : g.wr) CHECK(w > 0.0);
    CHECK(g.total_weight() == doctest::Approx(3.0 * M_PI).epsilon(1e-12));

    for (Stretch s : {Stretch::uniform, Stretch::geometric, Stretch::algebraic}) {
        PolarGrid h = build_polar_grid(64.0, 256, 16, s);
        const double area = M_PI * (64.0 * 64.0 - 1.0);
        CHECK(h.total_weight() == doctest::Approx(area).epsilon(1e-12));
        CHECK(quadrature_rule(h).total_weight() == doctest::Approx(area).epsilon(1e-10));
    }
}

TEST_CASE("grid integrates a decaying profile to the closed form") {
    // integral of r^-3 over the annulus [1, 64]: 2*pi*(1 - 1/64).
    PolarGrid g = build_polar_grid(64.0, 256, 128, Stretch::geometric);
    const double v = integrate_grid(g, [](double r, double) { return std::pow(r, -3.0); });
    const double exact = 2.0 * M_PI * (1.0 - 1.0 / 64.0);
    CHECK(std::abs(v - exact) <= 1e-8 * exact);
}

TEST_CASE("angular rule is exact for trigonometric polynomials") {
    PolarGrid g = build_polar_grid(2.0, 8, 16, Stretch::uniform);
    const double v = integrate_grid(g, [](double, double th) {
        return std::cos(3.0 * th) * std::cos(3.0 * th);
    });
    // integral of cos^2(3 theta) over theta is pi; radial area factor (r^2-1)/2*... :
    // integral r dr over [1,2] = 3/2, so exact = 3/2 * pi.
    CHECK(v == doctest::Approx(1.5 * M_PI).epsilon(1e-13));
    // A pure high mode below Nyquist integrates to zero.
    const double z = integrate_grid(g, [](double, double th) { return std::sin(7.0 * th); });
    CHECK(std::abs(z) < 1e-13);
}

TEST_CASE("n_r rounds up to full panels; parameter validation") {
    PolarGrid g = build_polar_grid(4.0, 10, 8, Stretch::uniform, 4);
    CHECK(g.n_r() == 12);  // 3 panels of 4
    CHECK(g.panels.size() == 4);
    CHECK_THROWS(build_polar_grid(0.5, 8, 8));
    CHECK_THROWS(build_polar_grid(2.0, 8, 7));
    CHECK_THROWS(build_polar_grid(2.0, 8, 2));
}

TEST_CASE("antipodal pairing is exact") {
    PolarGrid g = build_polar_grid(2.0, 8, 32, Stretch::uniform);
    for (std::size_t j = 0; j < g.n_theta(); ++j) {
        const std::size_t op = g.antipode(j);
        CHECK(g.antipode(op) == j);
        CHECK(std::abs(std::fmod(g.theta[op] - g.theta[j] + 2.0 * M_PI, 2.0 * M_PI) - M_PI) <
              1e-12);
    }
}

TEST_CASE("shell decomposition tiles the annulus without overlap") {
    ShellDecomposition d = build_shells(2.0, 5);
    CHECK(d.outer_radius() == 64.0);
    // Shells are contiguous: hi of shell j equals lo of shell j+1.
    for (int j = 0; j < d.count; ++j) CHECK(d.shell(j).hi == d.shell(j + 1).lo);
    CHECK(d.shell(0).lo == 1.0);
    // Membership scan.
    for (double r : {1.5, 2.0, 3.9, 4.0, 63.0}) {
        const int j = d.shell_of(r);
        CHECK(j >= 0);
        CHECK(r >= d.shell(j).lo);
        CHECK(r < d.shell(j).hi);
    }
    CHECK(d.shell_of(0.5) == -1);
    CHECK(d.shell_of(100.0) == -1);
    // R = 1 leaves an empty collar shell.
    ShellDecomposition unit = build_shells(1.0, 3);
    CHECK(unit.shell(0).lo == unit.shell(0).hi);
}

TEST_CASE("grid serialization round-trips") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "exflow_grid_rt.txt").string();
    PolarGrid g = build_polar_grid(8.0, 24, 12, Stretch::geometric, 4);
    save_grid(g, path);
    PolarGrid h = load_grid(path);
    REQUIRE(h.n_r() == g.n_r());
    REQUIRE(h.n_theta() == g.n_theta());
    for (std::size_t i = 0; i < g.n_r(); ++i) {
        CHECK(h.r[i] == g.r[i]);  // bitwise via shortest round-trip decimals
        CHECK(h.wr[i] == doctest::Approx(g.wr[i]).epsilon(1e-15));
    }
    for (std::size_t j = 0; j < g.n_theta(); ++j) CHECK(h.theta[j] == g.theta[j]);
    // A second save is stable.
    save_grid(h, path + "2");
    PolarGrid h2 = load_grid(path + "2");
    for (std::size_t i = 0; i < g.n_r(); ++i)
        CHECK(h2.wr[i] == doctest::Approx(h.wr[i]).epsilon(1e-15));
    fs::remove(path);
    fs::remove(path + "2");
}

TEST_CASE("snap_to_panel picks the nearest boundary") {
    PolarGrid g = build_polar_grid(2.0, 16, 8, Stretch::uniform, 4);  // panels at 1, 1.25, ...
    CHECK(g.snap_to_panel(1.3) == doctest::Approx(1.25));
    CHECK(g.snap_to_panel(0.2) == 1.0);
    CHECK(g.snap_to_panel(5.0) == 2.0);
}
