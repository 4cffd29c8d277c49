#include "exflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "exflow/common.hpp"
#include "exflow/quadrature.hpp"

namespace exflow {

std::string stretch_name(Stretch s) {
    switch (s) {
        case Stretch::uniform: return "uniform";
        case Stretch::geometric: return "geometric";
        case Stretch::algebraic: return "algebraic";
    }
    return "uniform";
}

Stretch stretch_from_name(const std::string& name) {
    if (name == "uniform") return Stretch::uniform;
    if (name == "geometric") return Stretch::geometric;
    if (name == "algebraic") return Stretch::algebraic;
    throw std::invalid_argument("unknown stretch '" + name + "'");
}

double PolarGrid::total_weight() const {
    KahanSum s;
    for (double w : wr) s.add(w);
    return s.value() * wtheta * double(theta.size());
}

double PolarGrid::snap_to_panel(double x) const {
    double best = panels.front();
    for (double p : panels)
        if (std::abs(p - x) < std::abs(best - x)) best = p;
    return best;
}

namespace {

double stretch_map(Stretch s, double t, double r_max) {
    switch (s) {
        case Stretch::uniform: return 1.0 + (r_max - 1.0) * t;
        case Stretch::geometric: return std::exp(std::log(r_max) * t);
        case Stretch::algebraic: {
            // Quintic smoothstep: clusters panels at both ends of the annulus.
            double u = t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
            return 1.0 + (r_max - 1.0) * u;
        }
    }
    return 1.0;
}

}  // namespace

PolarGrid build_polar_grid(double r_max, std::size_t n_r, std::size_t n_theta, Stretch stretch,
                           int q) {
    if (!(r_max > 1.0)) throw std::invalid_argument("build_polar_grid: r_max must exceed 1");
    if (n_theta < 4 || n_theta % 2 != 0)
        throw std::invalid_argument("build_polar_grid: n_theta must be even and >= 4");
    if (q < 2) throw std::invalid_argument("build_polar_grid: q must be >= 2");
    if (n_r < std::size_t(q)) n_r = std::size_t(q);

    PolarGrid g;
    g.r_max = r_max;
    g.q = q;
    g.stretch = stretch;

    const std::size_t n_panels = (n_r + q - 1) / q;  // round n_r up to q multiple
    g.panels.resize(n_panels + 1);
    for (std::size_t i = 0; i <= n_panels; ++i) {
        g.panels[i] = stretch_map(stretch, double(i) / double(n_panels), r_max);
    }
    g.panels.front() = 1.0;
    g.panels.back() = r_max;

    const GaussRule& rule = gauss_legendre(q);
    g.r.reserve(n_panels * q);
    g.wr.reserve(n_panels * q);
    for (std::size_t p = 0; p < n_panels; ++p) {
        const double a = g.panels[p], b = g.panels[p + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int k = 0; k < q; ++k) {
            const double r = mid + half * rule.x[k];
            g.r.push_back(r);
            g.wr.push_back(half * rule.w[k] * r);  // absorb the measure r dr
        }
    }

    g.theta.resize(n_theta);
    g.wtheta = 2.0 * M_PI / double(n_theta);
    for (std::size_t j = 0; j < n_theta; ++j) g.theta[j] = g.wtheta * double(j);
    return g;
}

double QuadratureRule::total_weight() const {
    KahanSum s;
    for (double x : w) s.add(x);
    return s.value();
}

QuadratureRule quadrature_rule(const PolarGrid& grid) {
    QuadratureRule q;
    q.r.reserve(grid.n_nodes());
    q.theta.reserve(grid.n_nodes());
    q.w.reserve(grid.n_nodes());
    for (std::size_t i = 0; i < grid.n_r(); ++i)
        for (std::size_t j = 0; j < grid.n_theta(); ++j) {
            q.r.push_back(grid.r[i]);
            q.theta.push_back(grid.theta[j]);
            q.w.push_back(grid.wr[i] * grid.wtheta);
        }
    std::ostringstream d;
    d << "annulus r in [1," << format_double(grid.r_max) << "]";
    q.domain = d.str();
    return q;
}

double integrate_grid(const PolarGrid& grid, const std::function<double(double, double)>& f) {
    const std::size_t nt = grid.n_theta();
    return reduce_indexed(grid.n_nodes(), [&](std::size_t idx) {
        const std::size_t i = idx / nt, j = idx % nt;
        return grid.wr[i] * grid.wtheta * f(grid.r[i], grid.theta[j]);
    });
}

double integrate_radial(const PolarGrid& grid, const std::function<double(double)>& g) {
    return reduce_indexed(grid.n_r(), [&](std::size_t i) { return grid.wr[i] * g(grid.r[i]); });
}

ShellDecomposition::Shell ShellDecomposition::shell(int j) const {
    if (j < 0 || j > count) throw std::out_of_range("shell index");
    if (j == 0) return {1.0, R};
    return {R * std::pow(2.0, j - 1), R * std::pow(2.0, j)};
}

int ShellDecomposition::shell_of(double r) const {
    if (r <= 1.0 || r > outer_radius()) return -1;
    if (r < R) return 0;
    for (int j = 1; j <= count; ++j) {
        Shell s = shell(j);
        if (r >= s.lo && r < s.hi) return j;
    }
    return count;  // r == outer boundary
}

double ShellDecomposition::outer_radius() const { return R * std::pow(2.0, count); }

ShellDecomposition build_shells(double R, int count) {
    if (!(R >= 1.0)) throw std::invalid_argument("build_shells: R must be >= 1");
    if (count < 1) throw std::invalid_argument("build_shells: count must be >= 1");
    ShellDecomposition d;
    d.R = R;
    d.count = count;
    return d;
}

void save_grid(const PolarGrid& grid, const std::string& path) {
    std::ostringstream out;
    out << "# exflow polar-grid v1\n";
    out << "# stretch=" << stretch_name(grid.stretch) << " q=" << grid.q << " n_r=" << grid.n_r()
        << " n_theta=" << grid.n_theta() << " r_max=" << format_double(grid.r_max) << "\n";
    out << "r,theta,weight\n";
    for (std::size_t i = 0; i < grid.n_r(); ++i)
        for (std::size_t j = 0; j < grid.n_theta(); ++j)
            out << format_double(grid.r[i]) << "," << format_double(grid.theta[j]) << ","
                << format_double(grid.wr[i] * grid.wtheta) << "\n";
    atomic_write_file(path, out.str());
}

namespace {

std::string meta_value(const std::string& line, const std::string& key) {
    auto pos = line.find(key + "=");
    if (pos == std::string::npos) throw std::runtime_error("grid file: missing key " + key);
    pos += key.size() + 1;
    auto end = line.find(' ', pos);
    return line.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
}

}  // namespace

PolarGrid load_grid(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "# exflow polar-grid v1")
        throw std::runtime_error("grid file: bad magic line");
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
        throw std::runtime_error("grid file: missing metadata line");

    const Stretch stretch = stretch_from_name(meta_value(line, "stretch"));
    const int q = int(parse_double(meta_value(line, "q")));
    const std::size_t n_r = std::size_t(parse_double(meta_value(line, "n_r")));
    const std::size_t n_theta = std::size_t(parse_double(meta_value(line, "n_theta")));
    const double r_max = parse_double(meta_value(line, "r_max"));

    if (!std::getline(in, line) || line != "r,theta,weight")
        throw std::runtime_error("grid file: missing column row");

    PolarGrid grid = build_polar_grid(r_max, n_r, n_theta, stretch, q);
    if (grid.n_r() != n_r) throw std::runtime_error("grid file: n_r inconsistent with q");

    // Stored values are authoritative; the rebuilt grid only validates them.
    std::size_t idx = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, c;
        if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c))
            throw std::runtime_error("grid file: malformed row");
        if (idx >= grid.n_nodes()) throw std::runtime_error("grid file: too many rows");
        const std::size_t i = idx / n_theta, j = idx % n_theta;
        const double r = parse_double(a), th = parse_double(b), w = parse_double(c);
        auto close = [](double x, double y) {
            return std::abs(x - y) <= 1e-14 * std::max({std::abs(x), std::abs(y), 1.0});
        };
        if (!close(r, grid.r[i]) || !close(th, grid.theta[j]) ||
            !close(w, grid.wr[i] * grid.wtheta))
            throw std::runtime_error("grid file: row " + std::to_string(idx) +
                                     " inconsistent with metadata");
        if (j == 0) grid.r[i] = r;
        if (i == 0) grid.theta[j] = th;
        grid.wr[i] = w / grid.wtheta;
        ++idx;
    }
    if (idx != grid.n_nodes()) throw std::runtime_error("grid file: row count mismatch");
    return grid;
}

}  // namespace exflow
