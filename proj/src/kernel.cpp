#include "exflow/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "exflow/quadrature.hpp"

namespace exflow {

namespace {

const std::vector<double> kDefaultTimes = {0.25, 1.0,    4.0,    16.0,    64.0,
                                           256.0, 1024.0, 4096.0, 16384.0, 65536.0};

// Two-pass wrapper around the adaptive integrator: a crude pass fixes the
// magnitude, the second pass runs at a relative tolerance against it.
double integrate_rel(const Fn1D& f, double a, double b, std::vector<double> brks, double rel,
                     int q = 10) {
    if (!(b > a)) return 0.0;
    brks.erase(std::remove_if(brks.begin(), brks.end(),
                              [&](double x) { return !(x > a) || !(x < b); }),
               brks.end());
    std::sort(brks.begin(), brks.end());
    brks.erase(std::unique(brks.begin(), brks.end()), brks.end());
    const AdaptiveResult crude = integrate_adaptive(f, a, b, 1e6, brks, q, 4);
    const double scale = std::max(std::abs(crude.value), crude.error_estimate);
    const double tol = std::max(rel * scale, 1e-300);
    return integrate_adaptive(f, a, b, tol, brks, q).value;
}

// Exact-moment rule on the panel [a, s] touching the kernel endpoint:
// interpolate f at Chebyshev nodes, expand in powers of u = (s-tau)/w, and
// integrate u^(k+expo) in closed form. Exact when f is a polynomial of
// degree < 8 on the panel (piecewise-linear probes qualify).
double touching_moments(const std::function<double(double)>& f, double a, double s,
                        double expo) {
    const double w = s - a;
    if (!(w > 0.0)) return 0.0;
    constexpr int d = 8;
    Eigen::MatrixXd V(d, d);
    Eigen::VectorXd g(d);
    for (int i = 0; i < d; ++i) {
        const double u = 0.5 * (1.0 + std::cos(M_PI * (2.0 * i + 1.0) / (2.0 * d)));
        double p = 1.0;
        for (int k = 0; k < d; ++k) {
            V(i, k) = p;
            p *= u;
        }
        g(i) = f(s - w * u);
    }
    const Eigen::VectorXd c = V.partialPivLu().solve(g);
    double acc = 0.0;
    for (int k = 0; k < d; ++k) acc += c(k) / (double(k) + 1.0 + expo);
    return std::pow(w, 1.0 + expo) * acc;
}

// int_0^{min(t, hi)} (t - tau)^expo f(tau) dtau with the singular (or
// kinked) endpoint handled by the touching-panel moments and everything
// else by Gauss panels.
double weighted_integral(const KernelProbe& probe, double t, double expo, double rel) {
    const double hi = std::min(t, probe.support_hi);
    if (!(hi > 0.0)) return 0.0;
    const auto integrand = [&](double tau) { return std::pow(t - tau, expo) * probe.f(tau); };
    if (probe.support_hi >= t) {
        double b_max = 0.0;
        for (double b : probe.breakpoints)
            if (b < t) b_max = std::max(b_max, b);
        const double w = (t - b_max) / 8.0;
        const double split = t - w;
        const double regular =
            split > 0.0 ? integrate_rel(integrand, 0.0, split, probe.breakpoints, rel) : 0.0;
        return regular + touching_moments(probe.f, split, t, expo);
    }
    return integrate_rel(integrand, 0.0, hi, probe.breakpoints, rel);
}

void validate_probe(const KernelProbe& probe, double upto) {
    if (!probe.f) throw std::invalid_argument("kernel probe carries no function");
    const double span = std::min(upto, probe.support_hi);
    if (!(span > 0.0)) return;
    for (int j = 0; j < 48; ++j) {
        const double x = span * (j + 0.5) / 48.0;
        if (probe.f(x) < -1e-12) throw std::domain_error("kernel probe must be nonnegative");
    }
}

}  // namespace

KernelProbe step_probe() {
    KernelProbe p;
    p.f = [](double tau) { return tau <= 1.0 ? 1.0 : 0.0; };
    p.square_integrable = true;
    p.breakpoints = {1.0};
    p.support_hi = 1.0;
    p.t_grid = kDefaultTimes;
    return p;
}

KernelProbe smooth_decay_probe() {
    KernelProbe p;
    p.f = [](double tau) { return 1.0 / (1.0 + tau); };
    p.square_integrable = true;
    p.tail_hint = -1.0;
    p.t_grid = kDefaultTimes;
    return p;
}

KernelProbe trace_probe(const EnergyTrace& trace) {
    if (trace.grad_norm.empty())
        throw std::invalid_argument("trace_probe: trace carries no gradient history");
    auto ts = std::make_shared<std::vector<double>>();
    auto vs = std::make_shared<std::vector<double>>();
    const std::size_t n = trace.grad_norm.size();
    const std::size_t stride = std::max<std::size_t>(1, (n + 255) / 256);
    for (std::size_t i = 0; i < n; i += stride) {
        ts->push_back(trace.t[i]);
        vs->push_back(trace.grad_norm[i]);
    }
    if (ts->back() != trace.t[n - 1]) {
        ts->push_back(trace.t[n - 1]);
        vs->push_back(trace.grad_norm[n - 1]);
    }
    KernelProbe p;
    p.f = [ts, vs](double tau) {
        if (tau <= ts->front()) return tau < ts->front() ? 0.0 : vs->front();
        if (tau >= ts->back()) return tau > ts->back() ? 0.0 : vs->back();
        const auto it = std::upper_bound(ts->begin(), ts->end(), tau);
        const std::size_t k = std::size_t(it - ts->begin());
        const double lam = (tau - (*ts)[k - 1]) / ((*ts)[k] - (*ts)[k - 1]);
        return (1.0 - lam) * (*vs)[k - 1] + lam * (*vs)[k];
    };
    p.square_integrable = true;
    p.breakpoints.assign(ts->begin(), ts->end());
    p.support_hi = ts->back();
    const double T = ts->back();
    p.t_grid = T > 0.0 ? std::vector<double>{T / 8.0, T / 4.0, T / 2.0, T}
                       : std::vector<double>{1.0};
    return p;
}

KernelAverage kernel_average_forms(const KernelProbe& probe, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("kernel_average: t must be positive");
    validate_probe(probe, t);
    KernelAverage out;
    out.single_form = 2.0 / t * weighted_integral(probe, t, 0.5, 1e-12);
    std::vector<double> outer_brks = probe.breakpoints;
    if (probe.support_hi < t) outer_brks.push_back(probe.support_hi);
    const auto inner = [&](double s) { return s > 0.0 ? abel_integral(probe, s) : 0.0; };
    out.double_form = integrate_rel(inner, 0.0, t, outer_brks, 1e-10) / t;
    return out;
}

double kernel_average(const KernelProbe& probe, double t) {
    const KernelAverage forms = kernel_average_forms(probe, t);
    const double diff = std::abs(forms.single_form - forms.double_form);
    const double scale = std::max(std::abs(forms.single_form), std::abs(forms.double_form));
    if (diff > 1e-6 * scale && diff > 1e-12) {
        std::ostringstream msg;
        msg << "kernel_average: interchange check failed at t=" << format_double(t)
            << ": single=" << format_double(forms.single_form)
            << " double=" << format_double(forms.double_form);
        throw std::runtime_error(msg.str());
    }
    return forms.single_form;
}

double chi_pairing(const KernelProbe& probe, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("chi_pairing: t must be positive");
    validate_probe(probe, t);
    const double hi = std::min(t, probe.support_hi);
    if (!(hi > 0.0)) return 0.0;
    return integrate_rel(probe.f, 0.0, hi, probe.breakpoints, 1e-12) / std::sqrt(t);
}

double probe_l2_norm(const KernelProbe& probe) {
    const auto f2 = [&](double tau) {
        const double v = probe.f(tau);
        return v * v;
    };
    if (std::isfinite(probe.support_hi))
        return std::sqrt(
            std::max(0.0, integrate_rel(f2, 0.0, probe.support_hi, probe.breakpoints, 1e-12)));
    if (!probe.square_integrable)
        throw std::invalid_argument("probe_l2_norm: probe not tagged square integrable");
    double head_end = 1.0;
    for (double b : probe.breakpoints) head_end = std::max(head_end, b);
    const double head = integrate_rel(f2, 0.0, head_end, probe.breakpoints, 1e-12);
    const ImproperResult tail =
        improper_radial_integral(f2, head_end, 2.0 * probe.tail_hint, 1e-11);
    if (tail.divergent)
        throw std::runtime_error("probe_l2_norm: tail diverges under the declared decay hint");
    return std::sqrt(std::max(0.0, head + tail.value));
}

double abel_integral(const KernelProbe& probe, double s) {
    if (s < 0.0) throw std::invalid_argument("abel_integral: negative time");
    if (s == 0.0) return 0.0;
    return weighted_integral(probe, s, -0.5, 1e-11);
}

CsvTable kernel_csv(const KernelProbe& probe) {
    const std::vector<double>& grid = probe.t_grid.empty() ? kDefaultTimes : probe.t_grid;
    const double bound = 2.0 * probe_l2_norm(probe);
    std::vector<KernelAverage> forms(grid.size());
    std::vector<double> chi(grid.size());
    // t-grid entries are independent.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t i = 0; i < grid.size(); ++i) {
        forms[i] = kernel_average_forms(probe, grid[i]);
        chi[i] = chi_pairing(probe, grid[i]);
    }
    CsvTable csv({"t", "I_double", "I_single", "chi_pairing", "bound_2norm"});
    csv.add_comment("I(t) = (1/t) int_0^t int_0^s (s-tau)^(-1/2) f(tau) dtau ds;"
                    " bound_2norm = 2 ||f||_2 dominates I and 2 ||chi_t f||_1");
    for (std::size_t i = 0; i < grid.size(); ++i)
        csv.add_row({grid[i], forms[i].double_form, forms[i].single_form, chi[i], bound});
    return csv;
}

DecayCertificate decay_certificate(const EnergyTrace& trace, const GalerkinSystem& sys,
                                   const Eigen::VectorXd& xi0, double C) {
    if (trace.t.empty()) throw std::invalid_argument("decay_certificate: empty trace");
    DecayCertificate cert;
    cert.C = C;
    const KernelProbe probe = trace_probe(trace);
    const double v0_norm = std::sqrt(std::max(0.0, sys.energy(xi0)));
    const std::vector<double> avg = cesaro_average(trace);

    const std::size_t n = trace.t.size();
    const std::size_t stride = std::max<std::size_t>(1, (n - 1 + 31) / 32);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
    if (idx.back() != n - 1) idx.push_back(n - 1);

    for (std::size_t i : idx) {
        const double s = trace.t[i];
        const double lhs = std::sqrt(std::max(0.0, trace.energy[i]));
        const Eigen::VectorXd cs = semigroup_apply_coeffs(sys, xi0, s, Generator::L);
        const double semi = std::sqrt(std::max(0.0, sys.energy(cs)));
        const double kern = C * v0_norm * abel_integral(probe, s);
        cert.s.push_back(s);
        cert.lhs.push_back(lhs);
        cert.semigroup_term.push_back(semi);
        cert.kernel_term.push_back(kern);
        cert.cesaro.push_back(avg[i]);
        if (lhs > semi + kern + 1e-9 * (1.0 + lhs)) cert.dominated = false;
    }

    const double T = trace.t.back();
    if (T > 0.0) {
        std::size_t i10 = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(trace.t[i] - T / 10.0) < std::abs(trace.t[i10] - T / 10.0)) i10 = i;
        if (avg[i10] > 0.0) cert.cesaro_ratio = avg.back() / avg[i10];
    }
    return cert;
}

CsvTable DecayCertificate::to_csv() const {
    CsvTable csv({"s", "lhs", "semigroup_term", "kernel_term", "cesaro"});
    csv.add_comment("lhs = ||v(s)||; rhs terms: ||e^{-sL} v0|| and C ||v0|| *"
                    " int_0^s (s-tau)^(-1/2) ||grad v(tau)|| dtau");
    csv.add_comment("C = " + format_double(C) + "; dominated = " +
                    std::string(dominated ? "1" : "0") +
                    "; cesaro_ratio = " + format_double(cesaro_ratio));
    for (std::size_t i = 0; i < s.size(); ++i)
        csv.add_row({s[i], lhs[i], semigroup_term[i], kernel_term[i], cesaro[i]});
    return csv;
}

}  // namespace exflow
