#include "exflow/stream.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "exflow/common.hpp"

namespace exflow {

RadialProfile poly_bump(double a, double b) {
    if (!(b > a)) throw std::invalid_argument("poly_bump: empty support");
    const double L = b - a;
    RadialProfile p;
    p.lo = a;
    p.hi = b;
    p.f = [a, b, L](double r) {
        if (r <= a || r >= b) return 0.0;
        const double t = (r - a) / L;
        const double u = t * (1.0 - t);
        return 64.0 * u * u * u;
    };
    p.d1 = [a, b, L](double r) {
        if (r <= a || r >= b) return 0.0;
        const double t = (r - a) / L;
        const double u = t * (1.0 - t);
        return 64.0 * 3.0 * u * u * (1.0 - 2.0 * t) / L;
    };
    p.d2 = [a, b, L](double r) {
        if (r <= a || r >= b) return 0.0;
        const double t = (r - a) / L;
        const double u = t * (1.0 - t);
        // d2/dt2 of u^3 = 6u (1-2t)^2 - 6u^2... expanded below
        const double s = 1.0 - 2.0 * t;
        return 64.0 * (6.0 * u * s * s - 6.0 * u * u) / (L * L);
    };
    return p;
}

namespace {

// Cox-de Boor evaluation of one B-spline of degree k over padded knots.
double bspline_value(const std::vector<double>& t, std::size_t j, int k, double x) {
    if (k == 0) return (t[j] <= x && x < t[j + 1]) ? 1.0 : 0.0;
    double out = 0.0;
    const double da = t[j + k] - t[j];
    if (da > 0.0) out += (x - t[j]) / da * bspline_value(t, j, k - 1, x);
    const double db = t[j + k + 1] - t[j + 1];
    if (db > 0.0) out += (t[j + k + 1] - x) / db * bspline_value(t, j + 1, k - 1, x);
    return out;
}

double bspline_d1(const std::vector<double>& t, std::size_t j, int k, double x) {
    double out = 0.0;
    const double da = t[j + k] - t[j];
    if (da > 0.0) out += bspline_value(t, j, k - 1, x) / da;
    const double db = t[j + k + 1] - t[j + 1];
    if (db > 0.0) out -= bspline_value(t, j + 1, k - 1, x) / db;
    return k * out;
}

double bspline_d2(const std::vector<double>& t, std::size_t j, int k, double x) {
    double out = 0.0;
    const double da = t[j + k] - t[j];
    if (da > 0.0) out += bspline_d1(t, j, k - 1, x) / da;
    const double db = t[j + k + 1] - t[j + 1];
    if (db > 0.0) out -= bspline_d1(t, j + 1, k - 1, x) / db;
    return k * out;
}

}  // namespace

RadialProfile bspline_profile(std::shared_ptr<const std::vector<double>> knots, std::size_t j) {
    if (!knots || knots->size() < j + 5)
        throw std::invalid_argument("bspline_profile: knot vector too short");
    RadialProfile p;
    p.lo = (*knots)[j];
    p.hi = (*knots)[j + 4];
    p.f = [knots, j](double r) { return bspline_value(*knots, j, 3, r); };
    p.d1 = [knots, j](double r) { return bspline_d1(*knots, j, 3, r); };
    p.d2 = [knots, j](double r) { return bspline_d2(*knots, j, 3, r); };
    return p;
}

namespace {

struct ModeEval {
    double vr, vt, grr, grt, gtr, gtt, psi;
};

// Mode formulas for psi = amp * f(r) * trig(m theta). The gradient entries
// are the polar-frame covariant components; their trace vanishes
// identically, which is the divergence-free property.
ModeEval eval_mode(const StreamMode& mode, double r, double theta) {
    ModeEval e{};
    if (r <= mode.prof.lo || r >= mode.prof.hi) return e;
    const double f = mode.prof.f(r);
    const double f1 = mode.prof.d1(r);
    const double f2 = mode.prof.d2(r);
    const double m = mode.m;
    const double c = std::cos(m * theta), s = std::sin(m * theta);
    const double q = f1 / r - f / (r * r);  // (f/r)'
    const double a = mode.amp;
    if (!mode.is_sin) {
        e.psi = a * f * c;
        e.vr = -a * m * (f / r) * s;
        e.vt = -a * f1 * c;
        e.grr = -a * m * q * s;
        e.grt = a * (f1 / r - m * m * f / (r * r)) * c;
        e.gtr = -a * f2 * c;
        e.gtt = a * m * q * s;
    } else {
        e.psi = a * f * s;
        e.vr = a * m * (f / r) * c;
        e.vt = -a * f1 * s;
        e.grr = a * m * q * c;
        e.grt = a * (f1 / r - m * m * f / (r * r)) * s;
        e.gtr = -a * f2 * s;
        e.gtt = -a * m * q * c;
    }
    return e;
}

}  // namespace

double StreamField::psi(double r, double theta) const {
    double s = 0.0;
    for (const auto& m : modes) s += eval_mode(m, r, theta).psi;
    return s;
}

PolarVec StreamField::velocity(double r, double theta) const {
    PolarVec v;
    for (const auto& m : modes) {
        ModeEval e = eval_mode(m, r, theta);
        v.r += e.vr;
        v.t += e.vt;
    }
    return v;
}

FieldSample StreamField::sample(double r, double theta) const {
    FieldSample s;
    for (const auto& m : modes) {
        ModeEval e = eval_mode(m, r, theta);
        s.v.r += e.vr;
        s.v.t += e.vt;
        s.g.rr += e.grr;
        s.g.rt += e.grt;
        s.g.tr += e.gtr;
        s.g.tt += e.gtt;
    }
    return s;
}

int StreamField::max_mode() const {
    int mm = 0;
    for (const auto& m : modes) mm = std::max(mm, m.m);
    return mm;
}

bool StreamField::centrally_symmetric() const {
    for (const auto& m : modes)
        if (m.m % 2 != 0) return false;
    return true;
}

StreamField StreamField::central_part() const {
    StreamField out;
    for (const auto& m : modes)
        if (m.m % 2 == 0) out.modes.push_back(m);
    return out;
}

double StreamField::support_lo() const {
    double lo = 1e300;
    for (const auto& m : modes) lo = std::min(lo, m.prof.lo);
    return modes.empty() ? 1.0 : lo;
}

double StreamField::support_hi() const {
    double hi = 0.0;
    for (const auto& m : modes) hi = std::max(hi, m.prof.hi);
    return modes.empty() ? 1.0 : hi;
}

StreamField random_stream_field(std::uint64_t seed, std::uint64_t index, const PolarGrid& grid,
                                const RandomFieldParams& params) {
    SplitMix64 rng = substream(seed, index);
    const double lo_lim = std::max(params.r_lo, 1.0);
    const double hi_lim = params.r_hi > 0.0 ? params.r_hi : grid.r_max;

    // Panel boundaries available for supports.
    std::vector<double> edges;
    for (double p : grid.panels)
        if (p >= lo_lim - 1e-12 && p <= hi_lim + 1e-12) edges.push_back(p);
    if (edges.size() < 3) throw std::invalid_argument("random_stream_field: support window too small");

    StreamField field;
    for (int n = 0; n < params.n_modes; ++n) {
        StreamMode mode;
        if (params.central_only) {
            mode.m = 2 * int(rng.next_below(std::uint64_t(params.m_max / 2 + 1)));
        } else {
            mode.m = int(rng.next_below(std::uint64_t(params.m_max + 1)));
        }
        mode.is_sin = mode.m > 0 && rng.next_double() < 0.5;
        mode.amp = rng.uniform(-1.0, 1.0);
        if (std::abs(mode.amp) < 0.05) mode.amp = 0.05;  // keep modes alive

        std::size_t i = rng.next_below(edges.size() - 1);
        std::size_t j = rng.next_below(edges.size() - 1);
        if (i > j) std::swap(i, j);
        j += 1;
        if (j - i < 2) j = std::min(edges.size() - 1, i + 2);
        if (j - i < 2) i = j - 2;
        mode.prof = poly_bump(edges[i], edges[j]);
        field.modes.push_back(std::move(mode));
    }
    return field;
}

VelocityFieldPolar stream_to_velocity(const StreamField& psi,
                                      std::shared_ptr<const PolarGrid> grid) {
    const int nyquist = int(grid->n_theta()) / 2;
    if (psi.max_mode() >= nyquist)
        throw std::invalid_argument("stream_to_velocity: angular mode at or beyond grid Nyquist");
    VelocityFieldPolar out;
    out.grid = grid;
    const std::size_t n = grid->n_nodes(), nt = grid->n_theta();
    out.vr.resize(n);
    out.vt.resize(n);
    out.grr.resize(n);
    out.grt.resize(n);
    out.gtr.resize(n);
    out.gtt.resize(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t idx = 0; idx < n; ++idx) {
        const double r = grid->r[idx / nt];
        const double th = grid->theta[idx % nt];
        FieldSample s = psi.sample(r, th);
        out.vr[idx] = s.v.r;
        out.vt[idx] = s.v.t;
        out.grr[idx] = s.g.rr;
        out.grt[idx] = s.g.rt;
        out.gtr[idx] = s.g.tr;
        out.gtt[idx] = s.g.tt;
    }
    return out;
}

std::vector<double> fd_weights(double x0, const std::vector<double>& xs, int k) {
    // Fornberg 1988, weights for derivatives 0..k at x0; returns order k.
    const int n = int(xs.size());
    if (n < k + 1) throw std::invalid_argument("fd_weights: not enough nodes");
    std::vector<std::vector<double>> c(std::size_t(n), std::vector<double>(std::size_t(k) + 1, 0.0));
    double c1 = 1.0;
    double c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, k);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = xs[std::size_t(i)] - x0;
        for (int j = 0; j < i; ++j) {
            const double c3 = xs[std::size_t(i)] - xs[std::size_t(j)];
            c2 *= c3;
            if (j == i - 1) {
                for (int v = mn; v >= 1; --v)
                    c[std::size_t(i)][std::size_t(v)] =
                        c1 * (v * c[std::size_t(i - 1)][std::size_t(v - 1)] -
                              c5 * c[std::size_t(i - 1)][std::size_t(v)]) / c2;
                c[std::size_t(i)][0] = -c1 * c5 * c[std::size_t(i - 1)][0] / c2;
            }
            for (int v = mn; v >= 1; --v)
                c[std::size_t(j)][std::size_t(v)] =
                    (c4 * c[std::size_t(j)][std::size_t(v)] -
                     v * c[std::size_t(j)][std::size_t(v - 1)]) / c3;
            c[std::size_t(j)][0] = c4 * c[std::size_t(j)][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[std::size_t(i)] = c[std::size_t(i)][std::size_t(k)];
    return w;
}

void gradient_from_samples(VelocityFieldPolar& field) {
    const PolarGrid& g = *field.grid;
    const std::size_t nr = g.n_r(), nt = g.n_theta(), n = nr * nt;
    field.grr.assign(n, 0.0);
    field.grt.assign(n, 0.0);
    field.gtr.assign(n, 0.0);
    field.gtt.assign(n, 0.0);

    // Radial stencils: 5 nearest nodes around each radial index.
    const int W = 5;
    std::vector<std::vector<double>> wts(nr);
    std::vector<std::size_t> starts(nr);
    for (std::size_t i = 0; i < nr; ++i) {
        std::size_t s = i >= 2 ? i - 2 : 0;
        if (s + W > nr) s = nr - W;
        starts[i] = s;
        std::vector<double> xs(g.r.begin() + long(s), g.r.begin() + long(s + W));
        wts[i] = fd_weights(g.r[i], xs, 1);
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t idx = 0; idx < n; ++idx) {
        const std::size_t i = idx / nt, j = idx % nt;
        const double r = g.r[i];
        double dvr_dr = 0.0, dvt_dr = 0.0;
        for (int a = 0; a < W; ++a) {
            const std::size_t src = (starts[i] + std::size_t(a)) * nt + j;
            dvr_dr += wts[i][std::size_t(a)] * field.vr[src];
            dvt_dr += wts[i][std::size_t(a)] * field.vt[src];
        }
        // 4th-order central difference in theta (periodic).
        auto at = [&](long dj, const std::vector<double>& v) {
            return v[i * nt + std::size_t((long(j) + dj + long(nt)) % long(nt))];
        };
        const double h = g.wtheta;
        const double dvr_dt =
            (-at(2, field.vr) + 8.0 * at(1, field.vr) - 8.0 * at(-1, field.vr) + at(-2, field.vr)) /
            (12.0 * h);
        const double dvt_dt =
            (-at(2, field.vt) + 8.0 * at(1, field.vt) - 8.0 * at(-1, field.vt) + at(-2, field.vt)) /
            (12.0 * h);
        field.grr[idx] = dvr_dr;
        field.grt[idx] = dvr_dt / r - field.vt[idx] / r;
        field.gtr[idx] = dvt_dr;
        field.gtt[idx] = dvt_dt / r + field.vr[idx] / r;
    }
}

VelocityFieldPolar project_central(const VelocityFieldPolar& v) {
    VelocityFieldPolar out;
    out.grid = v.grid;
    const std::size_t nt = v.grid->n_theta();
    auto avg = [&](const std::vector<double>& src, std::vector<double>& dst) {
        if (src.empty()) return;
        dst.resize(src.size());
        for (std::size_t idx = 0; idx < src.size(); ++idx) {
            const std::size_t i = idx / nt, j = idx % nt;
            const std::size_t op = i * nt + v.grid->antipode(j);
            dst[idx] = 0.5 * (src[idx] + src[op]);
        }
    };
    avg(v.vr, out.vr);
    avg(v.vt, out.vt);
    avg(v.grr, out.grr);
    avg(v.grt, out.grt);
    avg(v.gtr, out.gtr);
    avg(v.gtt, out.gtt);
    return out;
}

double central_defect(const VelocityFieldPolar& v) {
    const VelocityFieldPolar p = project_central(v);
    double worst = 0.0;
    auto scan = [&](const std::vector<double>& a, const std::vector<double>& b) {
        for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    };
    scan(v.vr, p.vr);
    scan(v.vt, p.vt);
    if (v.has_gradient()) {
        scan(v.grr, p.grr);
        scan(v.grt, p.grt);
        scan(v.gtr, p.gtr);
        scan(v.gtt, p.gtt);
    }
    return worst;
}

}  // namespace exflow
