#include "exflow/steady.hpp"

#include <cmath>

namespace exflow {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;
constexpr double kFourPi = 4.0 * M_PI;

bool resonant_flux(double phi) { return std::abs(phi + kFourPi) <= 1e-12 * kFourPi; }
}  // namespace

double hamel_gamma(double phi, double r) {
    if (resonant_flux(phi)) return std::log(r) / r;
    return std::pow(r, 1.0 + phi / kTwoPi);
}

double hamel_gamma_prime(double phi, double r) {
    if (resonant_flux(phi)) return (1.0 - std::log(r)) / (r * r);
    const double e = 1.0 + phi / kTwoPi;
    return e * std::pow(r, e - 1.0);
}

PolarVec hamel_velocity(const SteadyFlowParams& p, double r) {
    PolarVec v;
    v.r = p.phi / (kTwoPi * r);
    v.t = p.mu / (kTwoPi * r) + p.amp * hamel_gamma(p.phi, r);
    return v;
}

PolarMat hamel_gradient(const SteadyFlowParams& p, double r) {
    const PolarVec v = hamel_velocity(p, r);
    PolarMat g;
    const double r2 = r * r;
    g.rr = -p.phi / (kTwoPi * r2);
    g.rt = -v.t / r;
    g.tr = -p.mu / (kTwoPi * r2) + p.amp * hamel_gamma_prime(p.phi, r);
    g.tt = v.r / r;
    return g;
}

DecayClass classify_decay(const SteadyFlowParams& p) {
    DecayClass c;
    const bool swirl = p.amp != 0.0;
    if (swirl && p.phi >= -kFourPi && p.phi < -kTwoPi) {
        c.tag = DecayTag::supercritical;
        return c;
    }
    if (p.phi == 0.0 && p.mu == 0.0 && p.amp == 0.0) {
        c.tag = DecayTag::subcritical;
        return c;
    }
    if (swirl && p.phi < -kFourPi) {
        c.tag = DecayTag::subcritical;
        c.log_gap = true;  // faster than 1/r in power, no uniform r log r bound
        return c;
    }
    c.tag = DecayTag::critical;
    return c;
}

RadialEnvelope hamel_envelope(const SteadyFlowParams& p) {
    RadialEnvelope env;
    env.magnitude = [p](double r) {
        const PolarVec v = hamel_velocity(p, r);
        return std::hypot(v.r, v.t);
    };
    const bool base = p.phi != 0.0 || p.mu != 0.0;  // the 1/r part
    if (p.amp != 0.0) {
        if (resonant_flux(p.phi)) {
            env.power = 1.0;
            env.log_power = 1.0;
        } else {
            const double e = 1.0 + p.phi / kTwoPi;
            if (e > -1.0 || !base) {
                env.power = -e;
                env.log_power = 0.0;
            } else {
                env.power = 1.0;  // the 1/r part outlives the swirl term
                env.log_power = 0.0;
            }
        }
    } else if (base) {
        env.power = 1.0;
        env.log_power = 0.0;
    } else {
        env.magnitude = [](double) { return 0.0; };
        env.power = HUGE_VAL;
        env.log_power = 0.0;
    }
    return env;
}

namespace {

using Weight = std::function<double(double)>;

// Golden-section polish of max(weight * magnitude) on [a, b].
double polish_max(const Weight& w, const RadialEnvelope& u, double a, double b) {
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    auto f = [&](double r) { return w(r) * u.magnitude(r); };
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > 1e-14 * std::max(1.0, b); ++it) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = f(x1);
        }
    }
    return std::max(f1, f2);
}

WeightedSup weighted_sup(const Weight& w, const RadialEnvelope& u, const PolarGrid& grid,
                         bool diverges) {
    WeightedSup out;
    if (diverges) {
        out.divergent = true;
        out.value = HUGE_VAL;
        return out;
    }
    std::vector<double> pts(grid.r);
    for (int j = 1; j <= 80; ++j) {
        const double r = grid.r_max * std::pow(2.0, j);
        if (r > 1e250) break;
        pts.push_back(r);
    }
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double v = w(pts[i]) * u.magnitude(pts[i]);
        if (v > best) {
            best = v;
            arg = i;
        }
    }
    const double lo = arg == 0 ? 1.0 : pts[arg - 1];
    const double hi = arg + 1 < pts.size() ? pts[arg + 1] : pts[arg] * 2.0;
    out.value = std::max(best, polish_max(w, u, lo, hi));
    return out;
}

}  // namespace

WeightedSup weighted_sup_subcritical(const RadialEnvelope& u, const PolarGrid& grid) {
    // Weighted envelope ~ r^(1-p) log(r)^(1+q).
    const bool diverges = (1.0 - u.power > 0.0) || (u.power == 1.0 && 1.0 + u.log_power > 0.0);
    return weighted_sup([](double r) { return r * std::log(r); }, u, grid, diverges);
}

WeightedSup weighted_sup_critical(const RadialEnvelope& u, const PolarGrid& grid) {
    const bool diverges = (1.0 - u.power > 0.0) || (u.power == 1.0 && u.log_power > 0.0);
    return weighted_sup([](double r) { return r; }, u, grid, diverges);
}

}  // namespace exflow
