#include "exflow/counterexample.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "exflow/quadrature.hpp"

namespace exflow {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
using cplx = std::complex<double>;
}  // namespace

Deriv2 ramp01(double t) {
    Deriv2 o;
    if (t <= 0.0) return o;
    if (t >= 1.0) {
        o.f = 1.0;
        return o;
    }
    if (t < 1.0 / 3.0) {
        o.f = 4.5 * t * t * t;
        o.d1 = 13.5 * t * t;
        o.d2 = 27.0 * t;
    } else if (t < 2.0 / 3.0) {
        o.f = ((-9.0 * t + 13.5) * t - 4.5) * t + 0.5;
        o.d1 = (-27.0 * t + 27.0) * t - 4.5;
        o.d2 = -54.0 * t + 27.0;
    } else {
        const double u = 1.0 - t;
        o.f = 1.0 - 4.5 * u * u * u;
        o.d1 = 13.5 * u * u;
        o.d2 = -27.0 * u;
    }
    return o;
}

Deriv2 collar_chi(double r) {
    Deriv2 o = ramp01((r - 1.2) / 0.8);
    o.d1 /= 0.8;
    o.d2 /= 0.64;
    return o;
}

Deriv2 outer_eta(double s) {
    Deriv2 r = ramp01(s - 1.0);
    return {1.0 - r.f, -r.d1, -r.d2};
}

double log_k_alpha(double alpha) { return M_LN2 / (2.0 * (1.0 - std::cos(alpha))); }

double k_alpha(double alpha) { return std::exp2(0.5 / (1.0 - std::cos(alpha))); }

double k_alpha_identity_residual(double alpha) {
    const double c = std::cos(alpha);
    const double lk = log_k_alpha(alpha);
    // In s = log r the integrand is exp((2c-2)s) on [0, log k].
    AdaptiveResult q = integrate_adaptive([c](double s) { return std::exp((2.0 * c - 2.0) * s); },
                                          0.0, lk, 1e-13);
    return std::abs(q.value - 1.0 / (4.0 - 4.0 * c));
}

double psi_alpha(double alpha, double r, double theta) {
    const double c = std::cos(alpha);
    return std::pow(r, c) * std::cos(theta - std::sin(alpha) * std::log(r));
}

StreamField psi_alpha_stream(double alpha) {
    const double c = std::cos(alpha), sg = std::sin(alpha);
    // Radial profiles r^c cos(sg log r) and r^c sin(sg log r); derivatives
    // from d/dL with L = log r.
    auto make = [c, sg](bool sin_part) {
        RadialProfile p;
        p.lo = 1.0;
        p.hi = 1e300;
        p.f = [c, sg, sin_part](double r) {
            const double L = std::log(r), g = std::pow(r, c);
            return g * (sin_part ? std::sin(sg * L) : std::cos(sg * L));
        };
        p.d1 = [c, sg, sin_part](double r) {
            const double L = std::log(r), g = std::pow(r, c - 1.0);
            const double cs = std::cos(sg * L), sn = std::sin(sg * L);
            return sin_part ? g * (c * sn + sg * cs) : g * (c * cs - sg * sn);
        };
        p.d2 = [c, sg, sin_part](double r) {
            const double L = std::log(r), g = std::pow(r, c - 2.0);
            const double cs = std::cos(sg * L), sn = std::sin(sg * L);
            const double a = c * c - c - sg * sg;   // cos coefficient
            const double b = sg * (2.0 * c - 1.0);  // sin coefficient
            return sin_part ? g * (a * sn + b * cs) : g * (a * cs - b * sn);
        };
        return p;
    };
    StreamField f;
    StreamMode mc;
    mc.m = 1;
    mc.is_sin = false;
    mc.amp = 1.0;
    mc.prof = make(false);
    StreamMode ms;
    ms.m = 1;
    ms.is_sin = true;
    ms.amp = 1.0;
    ms.prof = make(true);
    f.modes = {mc, ms};
    return f;
}

Deriv2 AlphaField::eta_log(double s) const {
    const double llk = std::log(log_k);
    Deriv2 chi{1.0, 0.0, 0.0};
    if (s < M_LN2) {  // r < 2: collar profile active, r is representable
        chi = collar_chi(std::exp(s));
        const double r = std::exp(s);
        chi.d1 *= r;       // r chi'
        chi.d2 *= r * r;   // r^2 chi''
    }
    Deriv2 eta{1.0, 0.0, 0.0};
    if (s > 1.0 && std::log(s) / llk > 1.0 - 1e-14) {
        const double x = std::log(s) / llk;
        const Deriv2 e = outer_eta(x);
        eta.f = e.f;
        eta.d1 = e.d1 / (llk * s);                                        // r eta'
        eta.d2 = e.d2 / (llk * llk * s * s) - e.d1 * (s + 1.0) / (llk * s * s);  // r^2 eta''
    }
    Deriv2 out;
    out.f = chi.f * eta.f;
    out.d1 = chi.d1 * eta.f + chi.f * eta.d1;
    out.d2 = chi.d2 * eta.f + 2.0 * chi.d1 * eta.d1 + chi.f * eta.d2;
    return out;
}

Deriv2 cutoff_eta(double k, double r) {
    if (!(k > M_E)) throw std::invalid_argument("cutoff_eta: k must exceed e");
    if (!(r >= 1.0)) throw std::invalid_argument("cutoff_eta: r < 1");
    AlphaField af;
    af.log_k = std::log(k);
    Deriv2 o = af.eta_log(std::log(r));
    o.d1 /= r;
    o.d2 /= r * r;
    return o;
}

double measured_cutoff_constant(double log_k) {
    if (!(log_k > 1.0)) throw std::invalid_argument("measured_cutoff_constant: k <= e");
    AlphaField af;
    af.log_k = log_k;
    const double llk = std::log(log_k);
    // Quantity llk * s * (|r eta'| + |r^2 eta''|) scanned over the shell in
    // xi = log s (it vanishes identically on the plateau).
    double best = 0.0;
    const int N = 20000;
    for (int i = 0; i <= N; ++i) {
        const double xi = llk * (1.0 + double(i) / double(N));
        const double s = std::exp(xi);
        const Deriv2 e = af.eta_log(s);
        const double q = llk * s * (std::abs(e.d1) + std::abs(e.d2));
        if (q > best) best = q;
    }
    return best;
}

AlphaField make_alpha_field(double alpha) {
    if (!(alpha > 0.0 && alpha <= 0.85))
        throw std::invalid_argument("make_alpha_field: alpha must lie in (0, 0.85]");
    AlphaField af;
    af.alpha = alpha;
    af.log_k = log_k_alpha(alpha);
    af.k = std::exp(af.log_k);  // +inf below alpha ~ 0.031, by design
    af.log_K = af.log_k * af.log_k;
    af.C_eta = measured_cutoff_constant(af.log_k);
    return af;
}

VelocityFieldPolar build_valpha_on_grid(const AlphaField& af,
                                        std::shared_ptr<const PolarGrid> grid) {
    VelocityFieldPolar out;
    out.grid = grid;
    const std::size_t n = grid->n_nodes(), nt = grid->n_theta();
    out.vr.resize(n);
    out.vt.resize(n);
    out.grr.resize(n);
    out.grt.resize(n);
    out.gtr.resize(n);
    out.gtt.resize(n);
    const cplx beta(std::cos(af.alpha), -std::sin(af.alpha));
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double r = grid->r[idx / nt];
        const double th = grid->theta[idx % nt];
        const double s = std::log(r);
        const Deriv2 e = af.eta_log(s);  // eta, r eta', r^2 eta''
        // Complex radial profile F = eta_k r^beta; scale-free combinations:
        //   r F'/ r^beta  = d1 + beta f
        //   r^2 F''/r^beta = d2 + 2 beta d1 + beta (beta-1) f
        const cplx rb = std::exp(beta * s);  // r^beta
        const cplx F = e.f * rb;
        const cplx rF1 = (e.d1 + beta * e.f) * rb;
        const cplx r2F2 = (e.d2 + 2.0 * beta * e.d1 + beta * (beta - 1.0) * e.f) * rb;
        const cplx eith(std::cos(th), std::sin(th));
        const cplx iq = cplx(0.0, 1.0) * (rF1 - F) / (r * r);  // i (F'/r - F/r^2)
        out.vr[idx] = std::real(cplx(0.0, 1.0) * F / r * eith);
        out.vt[idx] = std::real(-rF1 / r * eith);
        out.grr[idx] = std::real(iq * eith);
        out.grt[idx] = std::real((rF1 - F) / (r * r) * eith);
        out.gtr[idx] = std::real(-r2F2 / (r * r) * eith);
        out.gtt[idx] = std::real(-iq * eith);
    }
    return out;
}

namespace {

// Angular-integrated densities for the mode-1 complex profile
// F = E(r) r^beta with scale-free derivative data (E, D1, D2):
//   |grad v|^2 density over ds:  pi (3 |T1|^2 + |T2|^2) exp((2c-2)s)
//   rotation pairing (mu=2pi):  2pi ((sin 2a)/2 E^2 + sin a E D1) exp((2c-2)s)
//   flux pairing (phi=1):       -(1/2) |T1|^2 exp((2c-2)s)
// with T1 = D1 + (beta-1) E, T2 = D2 + 2 beta D1 + beta (beta-1) E.
struct Densities {
    double h1, rot, flux;
};

struct AlphaCtx {
    double c, sa, s2a;
    cplx beta;
    const AlphaField* af;

    explicit AlphaCtx(const AlphaField& a)
        : c(std::cos(a.alpha)),
          sa(std::sin(a.alpha)),
          s2a(std::sin(2.0 * a.alpha)),
          beta(std::cos(a.alpha), -std::sin(a.alpha)),
          af(&a) {}

    Densities at(double s) const {
        const Deriv2 e = af->eta_log(s);
        const cplx T1 = e.d1 + (beta - 1.0) * e.f;
        const cplx T2 = e.d2 + 2.0 * beta * e.d1 + beta * (beta - 1.0) * e.f;
        const double env = std::exp((2.0 * c - 2.0) * s);
        Densities d;
        d.h1 = M_PI * (3.0 * std::norm(T1) + std::norm(T2)) * env;
        d.rot = kTwoPi * (0.5 * s2a * e.f * e.f + sa * e.f * e.d1) * env;
        d.flux = -0.5 * std::norm(T1) * env;
        return d;
    }
};

}  // namespace

double grad_energy_ualpha(double alpha) {
    const double c = std::cos(alpha);
    const cplx beta(c, -std::sin(alpha));
    const cplx T1 = beta - 1.0;
    const cplx T2 = beta * (beta - 1.0);
    // Density per dr of the untruncated field (E = 1, derivatives 0).
    auto f = [=](double r) {
        return M_PI * (3.0 * std::norm(T1) + std::norm(T2)) * std::pow(r, 2.0 * c - 3.0);
    };
    ImproperResult res = improper_radial_integral(f, 1.0, 2.0 * c - 3.0, 1e-12);
    if (res.divergent) throw std::runtime_error("grad_energy_ualpha: tail flagged divergent");
    return res.value;
}

double pairing_ualpha(double alpha, double mu) {
    if (mu == 0.0) return 0.0;
    const double c = std::cos(alpha);
    const double s2a = std::sin(2.0 * alpha);
    auto f = [=](double r) { return kTwoPi * 0.5 * s2a * std::pow(r, 2.0 * c - 3.0); };
    ImproperResult res = improper_radial_integral(f, 1.0, 2.0 * c - 3.0, 1e-12);
    if (res.divergent) throw std::runtime_error("pairing_ualpha: tail flagged divergent");
    return mu / kTwoPi * res.value;
}

ValphaIntegrals valpha_integrals(const AlphaField& af) {
    const AlphaCtx ctx(af);
    const double c = ctx.c;
    ValphaIntegrals out;

    // Collar [1.2, 2] in s, with the chi spline's knots as breakpoints.
    const double sa_ = std::log(1.2), sb = M_LN2;
    const std::vector<double> brk{std::log(1.2 + 0.8 / 3.0), std::log(1.2 + 1.6 / 3.0)};
    AdaptiveResult ch1 =
        integrate_adaptive([&](double s) { return ctx.at(s).h1; }, sa_, sb, 1e-11, brk);
    AdaptiveResult crot =
        integrate_adaptive([&](double s) { return ctx.at(s).rot; }, sa_, sb, 1e-11, brk);
    AdaptiveResult cflux =
        integrate_adaptive([&](double s) { return ctx.at(s).flux; }, sa_, sb, 1e-11, brk);

    // Plateau [2, k]: E = 1, derivatives vanish; exact antiderivative of
    // the envelope.
    const double p = 2.0 * c - 2.0;
    const double env_int = (std::exp(p * M_LN2) - std::exp(p * af.log_k)) / (-p);
    const double two2c = 2.0 - 2.0 * c;  // |beta - 1|^2
    const double ph1 = 4.0 * M_PI * two2c * env_int;
    const double prot = kTwoPi * 0.5 * ctx.s2a * env_int;
    const double pflux = -0.5 * two2c * env_int;

    // Cutoff shell [k, K] in xi = log s; eta's knots map to llk*{4/3,5/3}.
    const double llk = std::log(af.log_k);
    auto shell = [&](auto pick) {
        return integrate_adaptive(
            [&](double xi) {
                const double s = std::exp(xi);
                return pick(ctx.at(s)) * s;  // ds = s dxi
            },
            llk, 2.0 * llk, 1e-11, {llk * (4.0 / 3.0), llk * (5.0 / 3.0)});
    };
    AdaptiveResult sh1 = shell([](const Densities& d) { return d.h1; });
    AdaptiveResult srot = shell([](const Densities& d) { return d.rot; });
    AdaptiveResult sflux = shell([](const Densities& d) { return d.flux; });

    out.collar_h1 = ch1.value;
    out.h1sq = ch1.value + ph1 + sh1.value;
    out.I1 = crot.value;
    out.I2 = prot + srot.value;
    out.pair_rot = out.I1 + out.I2;
    out.pair_flux = cflux.value + pflux + sflux.value;
    out.converged = ch1.converged && crot.converged && cflux.converged && sh1.converged &&
                    srot.converged && sflux.converged;
    return out;
}

std::vector<RatioRow> ratio_scan(const std::vector<double>& alphas, double mu) {
    if (alphas.empty()) throw std::invalid_argument("ratio_scan: empty alpha list");
    std::vector<RatioRow> rows(alphas.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double a = alphas[i];
        const AlphaField af = make_alpha_field(a);
        const ValphaIntegrals vi = valpha_integrals(af);
        RatioRow& r = rows[i];
        r.alpha = a;
        r.k = af.k;
        const double scale = mu / kTwoPi;
        r.B = scale * vi.pair_rot / vi.h1sq;
        r.I1 = scale * vi.I1;
        r.I2 = scale * vi.I2;
        r.grad_energy = grad_energy_ualpha(a);
        const double closed = scale * M_PI * std::sin(2.0 * a) / (2.0 - 2.0 * std::cos(a));
        r.lower_bound = closed - std::abs(r.I1) - std::abs(closed - r.I2);
        r.converged = vi.converged;
    }
    return rows;
}

std::vector<RatioRow> ratio_descend(double alpha0, double mu, double target, int max_steps) {
    std::vector<RatioRow> rows;
    double a = alpha0;
    for (int i = 0; i < max_steps && a > 1e-6; ++i, a *= 0.65) {
        std::vector<RatioRow> one = ratio_scan({a}, mu);
        rows.push_back(one[0]);
        if (one[0].B >= target) break;
    }
    return rows;
}

CsvTable ratio_scan_csv(const std::vector<RatioRow>& rows, double mu) {
    CsvTable csv({"alpha", "k_alpha", "B", "I1", "I2", "grad_energy", "lower_bound"});
    csv.add_comment("anchors: eq:ualpha-int1 (grad_energy = 4*pi), eq:ualpha-int2 (pairing), "
                    "eq:def-k-alpha (k_alpha)");
    csv.add_comment("mu = " + format_double(mu));
    for (const auto& r : rows)
        csv.add_row({r.alpha, r.k, r.B, r.I1, r.I2, r.grad_energy, r.lower_bound});
    return csv;
}

}  // namespace exflow
