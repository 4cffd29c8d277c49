#include "exflow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "exflow/common.hpp"

namespace exflow {

namespace {

// Legendre P_n and P_n' at x by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    double dp = n * (x * p1 - p0) / (x * x - 1.0);
    return {p1, dp};
}

GaussRule make_gauss(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
    GaussRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    for (int i = 0; i < n; ++i) {
        // Standard initial guess; Newton converges in < 10 steps.
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            auto [p, dp] = legendre(n, x);
            double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        auto [p, dp] = legendre(n, x);
        (void)p;
        rule.x[i] = x;
        rule.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // Ascending nodes; enforce exact symmetry to kill Newton jitter.
    std::reverse(rule.x.begin(), rule.x.end());
    std::reverse(rule.w.begin(), rule.w.end());
    for (int i = 0; i < n / 2; ++i) {
        double xm = 0.5 * (rule.x[n - 1 - i] - rule.x[i]);
        double wm = 0.5 * (rule.w[i] + rule.w[n - 1 - i]);
        rule.x[i] = -xm;
        rule.x[n - 1 - i] = xm;
        rule.w[i] = rule.w[n - 1 - i] = wm;
    }
    if (n % 2) rule.x[n / 2] = 0.0;
    return rule;
}

double gauss_on(const Fn1D& f, double a, double b, const GaussRule& g) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    KahanSum s;
    for (std::size_t i = 0; i < g.x.size(); ++i) s.add(g.w[i] * f(mid + half * g.x[i]));
    return half * s.value();
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
    static std::map<int, GaussRule> cache;
    static std::mutex mtx;
    std::lock_guard<std::mutex> lock(mtx);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, make_gauss(n)).first;
    return it->second;
}

double integrate_panels(const Fn1D& f, const std::vector<double>& pts, int q) {
    const GaussRule& g = gauss_legendre(q);
    KahanSum s;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) s.add(gauss_on(f, pts[i], pts[i + 1], g));
    return s.value();
}

namespace {

struct Panel {
    double a, b, coarse;
    int depth;
};

}  // namespace

AdaptiveResult integrate_adaptive(const Fn1D& f, double a, double b, double tol,
                                  const std::vector<double>& breakpoints, int q, int max_depth) {
    AdaptiveResult out;
    if (!(b > a)) return out;
    const GaussRule& g = gauss_legendre(q);

    std::vector<double> pts{a};
    for (double x : breakpoints)
        if (x > a && x < b) pts.push_back(x);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());

    std::vector<Panel> stack;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        stack.push_back({pts[i], pts[i + 1], gauss_on(f, pts[i], pts[i + 1], g), 0});

    KahanSum value, err;
    const double span = b - a;
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        const double mid = 0.5 * (p.a + p.b);
        const double left = gauss_on(f, p.a, mid, g);
        const double right = gauss_on(f, mid, p.b, g);
        const double fine = left + right;
        const double e = std::abs(fine - p.coarse);
        const double budget = tol * std::max((p.b - p.a) / span, 1e-3);
        if (e <= budget || p.depth >= max_depth) {
            value.add(fine);
            err.add(e);
            if (p.depth >= max_depth && e > budget) out.converged = false;
        } else {
            stack.push_back({p.a, mid, left, p.depth + 1});
            stack.push_back({mid, p.b, right, p.depth + 1});
        }
    }
    out.value = value.value();
    out.error_estimate = err.value();
    return out;
}

ImproperResult improper_radial_integral(const Fn1D& f, double r0, double decay_hint,
                                        double rel_tol) {
    ImproperResult out;
    if (decay_hint >= -1.0) {
        out.divergent = true;
        out.error_estimate = HUGE_VAL;
        return out;
    }
    const GaussRule& g = gauss_legendre(15);
    const double h = decay_hint;
    KahanSum acc;
    double prev_total = 0.0;
    int stable = 0;
    const int max_panels = 400;
    for (int j = 0; j < max_panels; ++j) {
        const double lo = r0 * std::pow(2.0, j);
        const double hi = 2.0 * lo;
        acc.add(gauss_on(f, lo, hi, g));
        out.panels_used = j + 1;

        // Two-point tail model f ~ a r^h + b r^(h-1) matched at hi and lo.
        const double f2 = f(hi), f1 = f(lo);
        const double A2 = std::pow(hi, h), A1 = std::pow(lo, h);
        const double B2 = A2 / hi, B1 = A1 / lo;
        const double det = A1 * B2 - A2 * B1;
        double tail2;
        const double tail1 = -f2 * hi / (h + 1.0);
        if (det != 0.0 && std::isfinite(det)) {
            const double av = (f1 * B2 - f2 * B1) / det;
            const double bv = (A1 * f2 - A2 * f1) / det;
            tail2 = -av * A2 * hi / (h + 1.0) - bv * A2 / h;
        } else {
            tail2 = tail1;
        }
        const double total = acc.value() + tail2;
        const double scale = std::max(std::abs(total), 1e-300);
        if (j > 0 && std::abs(total - prev_total) <= rel_tol * scale &&
            std::abs(tail2 - tail1) <= 10.0 * rel_tol * scale) {
            if (++stable >= 2) {
                out.value = total;
                out.error_estimate = std::abs(tail2 - tail1) + std::abs(total - prev_total);
                return out;
            }
        } else {
            stable = 0;
        }
        prev_total = total;
    }
    out.value = prev_total;
    out.error_estimate = std::abs(prev_total) * 1e-6 + 1e-12;
    return out;
}

}  // namespace exflow
