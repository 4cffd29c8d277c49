#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "exflow/functionals.hpp"

using namespace exflow;

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

std::shared_ptr<const PolarGrid> make_grid(double r_max, int n_r, int n_theta,
                                           Stretch s = Stretch::geometric, int q = 4) {
    return std::make_shared<PolarGrid>(build_polar_grid(r_max, n_r, n_theta, s, q));
}

}  // namespace

TEST_CASE("norms: zero field, axisymmetric closed form, refinement stability") {
    auto grid = make_grid(6.0, 48, 32);
    VelocityFieldPolar z;
    z.grid = grid;
    z.vr.assign(grid->n_nodes(), 0.0);
    z.vt.assign(grid->n_nodes(), 0.0);
    z.grr.assign(grid->n_nodes(), 0.0);
    z.grt.assign(grid->n_nodes(), 0.0);
    z.gtr.assign(grid->n_nodes(), 0.0);
    z.gtt.assign(grid->n_nodes(), 0.0);
    CHECK(l2_norm(z) == 0.0);
    CHECK(h1_seminorm(z) == 0.0);

    // psi = log r on an m=0 mode: v = (0, -1/r), |grad v|^2 = 2/r^4,
    // integral over [1, r_max]: 2pi * (1 - r_max^-2).
    StreamField logpsi;
    StreamMode m0;
    m0.m = 0;
    m0.amp = 1.0;
    m0.prof.f = [](double r) { return std::log(r); };
    m0.prof.d1 = [](double r) { return 1.0 / r; };
    m0.prof.d2 = [](double r) { return -1.0 / (r * r); };
    m0.prof.lo = 1.0;
    m0.prof.hi = 1e300;
    logpsi.modes.push_back(m0);
    VelocityFieldPolar f = stream_to_velocity(logpsi, grid);
    for (std::size_t i = 0; i < f.n_nodes(); ++i) {
        CHECK(f.vr[i] == 0.0);
        CHECK(f.vt[i] == doctest::Approx(-1.0 / grid->node_r(i)).epsilon(1e-14));
    }
    const double want = std::sqrt(kTwoPi * (1.0 - 1.0 / 36.0));
    CHECK(h1_seminorm(f) == doctest::Approx(want).epsilon(1e-9));

    // Random band-limited field: stable under one refinement.
    RandomFieldParams rp;
    rp.r_lo = 1.25;
    StreamField rnd = random_stream_field(3, 0, *grid, rp);
    auto fine = make_grid(6.0, 96, 64);
    const double a = h1_seminorm(stream_to_velocity(rnd, grid));
    const double b = h1_seminorm(stream_to_velocity(rnd, fine));
    CHECK(a == doctest::Approx(b).epsilon(1e-5));
}

TEST_CASE("trilinear skew symmetry over random pairs") {
    // The integrand is a product of three degree-6 panel polynomials times
    // rational frame factors; q = 10 integrates the polynomial part exactly.
    auto grid = make_grid(8.0, 60, 64, Stretch::geometric, 10);
    RandomFieldParams p;
    p.r_lo = 1.2;
    int tested = 0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        VelocityFieldPolar a =
            stream_to_velocity(random_stream_field(17, 2 * i, *grid, p), grid);
        VelocityFieldPolar w =
            stream_to_velocity(random_stream_field(17, 2 * i + 1, *grid, p), grid);
        const double h1 = h1_seminorm(w);
        if (h1 == 0.0) continue;
        CHECK(std::abs(trilinear(a, w, w)) <= 1e-9 * h1 * h1);
        ++tested;
    }
    CHECK(tested >= 100);
}

TEST_CASE("trilinear is linear in the steady slot and matches the sampled form") {
    auto grid = make_grid(8.0, 48, 64);
    RandomFieldParams p;
    p.r_lo = 1.2;
    VelocityFieldPolar v = stream_to_velocity(random_stream_field(23, 0, *grid, p), grid);

    SteadyFlowParams rot{0.0, kTwoPi, 0.0};
    const double base = trilinear_steady(v, v, rot);
    CHECK(trilinear_steady(v, v, {0.0, 2.0 * kTwoPi, 0.0}) == doctest::Approx(2.0 * base).epsilon(1e-12));
    CHECK(trilinear_steady(v, v, {0.0, -kTwoPi, 0.0}) == doctest::Approx(-base).epsilon(1e-12));
    CHECK(trilinear_steady(v, v, {0.0, 0.0, 0.0}) == 0.0);

    // Sampled-ubar cross-check.
    VelocityFieldPolar u;
    u.grid = grid;
    u.vr.resize(grid->n_nodes());
    u.vt.resize(grid->n_nodes());
    for (std::size_t i = 0; i < grid->n_nodes(); ++i) {
        PolarVec uv = hamel_velocity(rot, grid->node_r(i));
        u.vr[i] = uv.r;
        u.vt[i] = uv.t;
    }
    CHECK(trilinear(v, v, u) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("flux-carrier bound holds with the sharp constant") {
    auto grid = make_grid(8.0, 48, 64);
    RandomFieldParams p;
    p.r_lo = 1.2;
    const double phis[] = {M_PI, -M_PI, 1.9 * M_PI};
    for (double phi : phis) {
        const double bound = std::abs(phi) / kTwoPi;
        for (std::uint64_t i = 0; i < 60; ++i) {
            StreamField f = random_stream_field(29, i, *grid, p);
            VelocityFieldPolar v = stream_to_velocity(f, grid);
            const double h1 = h1_seminorm(v);
            if (h1 == 0.0) continue;
            CHECK(std::abs(trilinear_steady(v, v, {phi, 0.0, 0.0})) <=
                  bound * (1.0 + 1e-6) * h1 * h1);
        }
    }
}

TEST_CASE("hypothesis ratio: zero background, scale invariance, zero-field error") {
    auto grid = make_grid(9.0, 128, 64, Stretch::uniform);
    StreamField v;
    v.modes.push_back({2, false, 0.9, poly_bump(2.0, 4.0)});
    v.modes.push_back({3, true, 0.4, poly_bump(2.0, 4.0)});
    CHECK(hypothesis_ratio(v, {0.0, 0.0, 0.0}, grid) == 0.0);

    // v_lambda(x) = lambda v(lambda x) with lambda = 1/2 doubles the support.
    StreamField vh;
    vh.modes.push_back({2, false, 0.9, poly_bump(4.0, 8.0)});
    vh.modes.push_back({3, true, 0.4, poly_bump(4.0, 8.0)});
    for (SteadyFlowParams ub : {SteadyFlowParams{0.0, kTwoPi, 0.0}, SteadyFlowParams{M_PI, 0.0, 0.0}}) {
        const double b1 = hypothesis_ratio(v, ub, grid);
        const double b2 = hypothesis_ratio(vh, ub, grid);
        CHECK(b1 == doctest::Approx(b2).epsilon(1e-8));
    }

    StreamField zero;
    CHECK_THROWS_AS(hypothesis_ratio(zero, {0.0, kTwoPi, 0.0}, grid), std::invalid_argument);
}

TEST_CASE("log Hardy quotient: collar enforcement and the constant 2") {
    auto grid = make_grid(16.0, 64, 64);
    RandomFieldParams p;
    p.r_lo = 1.1;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 100; ++i) {
        VelocityFieldPolar v = stream_to_velocity(random_stream_field(31, i, *grid, p), grid);
        worst = std::max(worst, hardy_quotient_log(v));
    }
    CHECK(worst <= 2.0 * (1.0 + 1e-6));
    CHECK(worst > 0.0);

    // A field alive at the boundary is rejected.
    StreamField bad;
    StreamMode m;
    m.m = 1;
    m.amp = 1.0;
    m.prof = poly_bump(1.0, 2.0);
    bad.modes.push_back(m);
    VelocityFieldPolar vb = stream_to_velocity(bad, grid);
    CHECK_THROWS_AS(hardy_quotient_log(vb), std::invalid_argument);
}

TEST_CASE("central Hardy quotient and the measured constant") {
    auto grid = make_grid(12.0, 48, 64);
    RandomFieldParams p;
    p.central_only = true;
    p.r_lo = 1.05;
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 60; ++i) {
        VelocityFieldPolar v = stream_to_velocity(random_stream_field(37, i, *grid, p), grid);
        worst = std::max(worst, hardy_quotient_central(v));
    }
    const double c = measure_central_hardy_constant(grid, 6, 10);
    // Random probes are not in the span of the measurement basis; allow a
    // small representation margin on top of the Rayleigh maximum.
    CHECK(worst <= c * 1.02);
    CHECK(c < 2.0);
    // Refinement stability within 5%.
    auto fine = make_grid(12.0, 96, 64);
    const double cf = measure_central_hardy_constant(fine, 6, 10);
    CHECK(std::abs(cf - c) <= 0.05 * c);
}

TEST_CASE("shell Poincare constants share one value across dyadic shells") {
    ShellDecomposition shells = build_shells(2.0, 3);
    auto grid = make_grid(16.0, 96, 64);
    ShellPoincare sp = shell_poincare_constants(shells, grid, 6, 5);
    REQUIRE(sp.per_shell.size() == 4);
    CHECK(sp.c0 == sp.per_shell[0]);
    CHECK(sp.c1 == sp.per_shell[1]);
    CHECK(sp.combined == doctest::Approx(*std::max_element(sp.per_shell.begin(), sp.per_shell.end())));
    for (double c : sp.per_shell) CHECK(c > 0.0);
    // Scale invariance: dyadic shells j >= 1 have comparable constants.
    for (std::size_t j = 2; j < sp.per_shell.size(); ++j) {
        CHECK(sp.per_shell[j] < 4.0 * sp.per_shell[1]);
        CHECK(sp.per_shell[j] > 0.25 * sp.per_shell[1]);
    }
    ShellDecomposition wide = build_shells(2.0, 6);
    CHECK_THROWS_AS(shell_poincare_constants(wide, grid, 2, 5), std::invalid_argument);
}

TEST_CASE("delta-star estimator: zero and flux backgrounds") {
    auto grid = make_grid(10.0, 48, 32);
    DeltaSearch s;
    s.n_random = 8;
    s.ascent_steps = 40;
    s.basis_m = 3;
    s.basis_j = 8;

    HypothesisReport z = estimate_delta_star({0.0, 0.0, 0.0}, grid, s);
    CHECK(z.delta_hat == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z.criterion_delta == 0.0);
    CHECK(z.verdict == Verdict::satisfied_by_criterion);

    HypothesisReport fx = estimate_delta_star({M_PI, 0.0, 0.0}, grid, s);
    CHECK(fx.criterion_delta == doctest::Approx(0.5));
    CHECK(fx.delta_hat <= 0.5 + 1e-6);
    CHECK(fx.verdict == Verdict::satisfied_by_criterion);
    // Best-so-far trace is monotone.
    for (std::size_t i = 1; i < fx.trial_values.size(); ++i)
        CHECK(fx.trial_values[i] >= fx.trial_values[i - 1]);
    // Budget monotonicity on the same seed prefix.
    DeltaSearch s2 = s;
    s2.n_random = 4;
    HypothesisReport fx2 = estimate_delta_star({M_PI, 0.0, 0.0}, grid, s2);
    CHECK(fx.delta_hat >= fx2.delta_hat - 1e-15);
    // The certificate field reproduces the reported quotient.
    if (fx.delta_hat > 1e-12) {
        const double b = hypothesis_ratio(fx.certificate_field, {M_PI, 0.0, 0.0}, grid);
        CHECK(b == doctest::Approx(fx.delta_hat).epsilon(1e-8));
    }
}

TEST_CASE("delta-star estimator refutes rotating backgrounds via the spiral family") {
    auto grid = make_grid(10.0, 48, 32);
    DeltaSearch s;
    s.n_random = 4;
    s.ascent_steps = 30;
    s.basis_m = 2;
    s.basis_j = 6;
    HypothesisReport rot = estimate_delta_star({0.0, kTwoPi, 0.0}, grid, s);
    CHECK(rot.delta_hat >= 1.0);
    CHECK(rot.verdict == Verdict::refuted_by_witness);
    CHECK(rot.witness_alpha > 0.0);
    CHECK(rot.witness_alpha < 0.2);
    CHECK(!rot.certificate_field.modes.empty());

    // Mirror background refutes the same way.
    HypothesisReport neg = estimate_delta_star({0.0, -kTwoPi, 0.0}, grid, s);
    CHECK(neg.delta_hat >= 1.0);
    CHECK(neg.verdict == Verdict::refuted_by_witness);

    const std::string text = rot.to_text();
    CHECK(text.find("verdict=refuted_by_witness") != std::string::npos);
    CHECK(text.find("witness_alpha=") != std::string::npos);
    CsvTable csv = rot.trials_csv();
    CHECK(csv.rows() == rot.trial_values.size());
}
