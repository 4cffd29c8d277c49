#include "exflow/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unsupported/Eigen/MatrixFunctions>

#include "exflow/functionals.hpp"

namespace exflow {

namespace {

// Radial node index range [lo, hi) covering [a, b] on the grid.
std::pair<std::size_t, std::size_t> radial_range(const PolarGrid& g, double a, double b) {
    const auto lo = std::lower_bound(g.r.begin(), g.r.end(), a);
    const auto hi = std::lower_bound(g.r.begin(), g.r.end(), b);
    return {std::size_t(lo - g.r.begin()), std::size_t(hi - g.r.begin())};
}

bool same_mt(const GalerkinBasis& b, std::size_t i, std::size_t j) {
    return b.mval[i] == b.mval[j] && b.trig[i] == b.trig[j];
}

// Weighted inner products over the radial intersection of two supports.
template <typename F>
double pair_sum(const GalerkinBasis& b, std::size_t i, std::size_t j, F&& term) {
    const PolarGrid& g = *b.grid;
    const std::size_t nt = g.n_theta();
    const std::size_t lo = std::max(b.support_lo[i], b.support_lo[j]);
    const std::size_t hi = std::min(b.support_hi[i], b.support_hi[j]);
    double acc = 0.0;
    for (std::size_t ir = lo; ir < hi; ++ir) {
        double row = 0.0;
        for (std::size_t it = 0; it < nt; ++it) row += term(ir * nt + it, ir);
        acc += g.wr[ir] * g.wtheta * row;
    }
    return acc;
}

double mass_entry(const GalerkinBasis& b, std::size_t i, std::size_t j) {
    const auto& fi = b.fields[i];
    const auto& fj = b.fields[j];
    return pair_sum(b, i, j, [&](std::size_t n, std::size_t) {
        return fi.vr[n] * fj.vr[n] + fi.vt[n] * fj.vt[n];
    });
}

double stiffness_entry(const GalerkinBasis& b, std::size_t i, std::size_t j) {
    const auto& fi = b.fields[i];
    const auto& fj = b.fields[j];
    return pair_sum(b, i, j, [&](std::size_t n, std::size_t) {
        return fi.grr[n] * fj.grr[n] + fi.grt[n] * fj.grt[n] + fi.gtr[n] * fj.gtr[n] +
               fi.gtt[n] * fj.gtt[n];
    });
}

}  // namespace

VelocityFieldPolar GalerkinBasis::reconstruct(const Eigen::VectorXd& c) const {
    if (std::size_t(c.size()) != n())
        throw std::invalid_argument("reconstruct: coefficient count mismatch");
    VelocityFieldPolar out;
    out.grid = grid;
    const std::size_t nn = grid->n_nodes();
    const std::size_t nt = grid->n_theta();
    out.vr.assign(nn, 0.0);
    out.vt.assign(nn, 0.0);
    out.grr.assign(nn, 0.0);
    out.grt.assign(nn, 0.0);
    out.gtr.assign(nn, 0.0);
    out.gtt.assign(nn, 0.0);
    // Mode-major accumulation: each node sees modes in index order, so the
    // result is independent of the thread count.
    for (std::size_t i = 0; i < n(); ++i) {
        const double ci = c(Eigen::Index(i));
        if (ci == 0.0) continue;
        const auto& f = fields[i];
        const std::size_t lo = support_lo[i] * nt, hi = support_hi[i] * nt;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (std::size_t k = lo; k < hi; ++k) {
            out.vr[k] += ci * f.vr[k];
            out.vt[k] += ci * f.vt[k];
            out.grr[k] += ci * f.grr[k];
            out.grt[k] += ci * f.grt[k];
            out.gtr[k] += ci * f.gtr[k];
            out.gtt[k] += ci * f.gtt[k];
        }
    }
    return out;
}

Eigen::VectorXd GalerkinBasis::project(const VelocityFieldPolar& v) const {
    if (!v.has_gradient()) throw std::invalid_argument("project: gradient channel missing");
    if (v.grid.get() != grid.get()) throw std::invalid_argument("project: field on another grid");
    Eigen::VectorXd b(static_cast<Eigen::Index>(n()));
    for (std::size_t i = 0; i < n(); ++i) {
        const auto& fi = fields[i];
        b(Eigen::Index(i)) = pair_sum(*this, i, i, [&](std::size_t k, std::size_t) {
            return fi.grr[k] * v.grr[k] + fi.grt[k] * v.grt[k] + fi.gtr[k] * v.gtr[k] +
                   fi.gtt[k] * v.gtt[k];
        });
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("project: H1 Gram not positive definite");
    return llt.solve(b);
}

bool GalerkinBasis::centrally_symmetric() const {
    for (int m : mval)
        if (m % 2 != 0) return false;
    return true;
}

GalerkinBasis build_galerkin_basis(std::shared_ptr<const PolarGrid> grid, int n_modes_theta,
                                   int n_modes_radial) {
    if (n_modes_theta < 0 || n_modes_radial < 1)
        throw std::invalid_argument("basis: need n_modes_theta >= 0, n_modes_radial >= 1");
    const std::size_t P = grid->panels.size() - 1;
    const std::size_t N = std::size_t(n_modes_radial) + 1;  // spline segments
    if (P < N)
        throw std::invalid_argument("basis: grid needs at least n_modes_radial + 1 radial panels");

    // Spline segment edges stride the quadrature panels evenly, so every
    // polynomial piece spans whole panels and the Gauss rules stay sharp.
    auto edges = std::make_shared<std::vector<double>>();
    std::vector<double> seg(N + 1);
    for (std::size_t i = 0; i <= N; ++i)
        seg[i] = grid->panels[std::size_t(std::llround(double(i) * double(P) / double(N)))];
    // Clamped cubic knot vector: 4-fold ends.
    edges->assign(3, seg.front());
    edges->insert(edges->end(), seg.begin(), seg.end());
    edges->insert(edges->end(), 3, seg.back());

    GalerkinBasis basis;
    basis.grid = grid;
    for (int m = 0; m <= n_modes_theta; ++m) {
        for (int tg = 0; tg < (m == 0 ? 1 : 2); ++tg) {
            // Shapes 0,1 and N+1,N+2 are dropped: the kept ones vanish with
            // their slope at both radii, so the velocity is no-slip there.
            for (std::size_t j = 2; j <= N; ++j) {
                StreamMode mode;
                mode.m = m;
                mode.is_sin = tg == 1;
                mode.amp = 1.0;
                mode.prof = bspline_profile(edges, j);
                StreamField single;
                single.modes = {mode};
                VelocityFieldPolar f = stream_to_velocity(single, grid);
                // Unit H1 norm keeps the Gram well conditioned.
                double h1sq = 0.0;
                for (std::size_t k = 0; k < f.n_nodes(); ++k) {
                    const double w = f.grid->wr[k / grid->n_theta()] * f.grid->wtheta;
                    h1sq += w * (f.grr[k] * f.grr[k] + f.grt[k] * f.grt[k] + f.gtr[k] * f.gtr[k] +
                                 f.gtt[k] * f.gtt[k]);
                }
                const double scale = 1.0 / std::sqrt(h1sq);
                for (auto* ch : {&f.vr, &f.vt, &f.grr, &f.grt, &f.gtr, &f.gtt})
                    for (double& x : *ch) x *= scale;
                mode.amp = scale;
                auto range = radial_range(*grid, mode.prof.lo, mode.prof.hi);
                basis.modes.push_back(std::move(mode));
                basis.fields.push_back(std::move(f));
                basis.mval.push_back(m);
                basis.trig.push_back(tg);
                basis.support_lo.push_back(range.first);
                basis.support_hi.push_back(range.second);
            }
        }
    }

    const std::size_t n = basis.n();
    basis.gram = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            if (!same_mt(basis, i, j)) continue;
            const double g = stiffness_entry(basis, i, j);
            basis.gram(Eigen::Index(i), Eigen::Index(j)) = g;
            basis.gram(Eigen::Index(j), Eigen::Index(i)) = g;
        }
    return basis;
}

namespace {

GalerkinBasis filter_basis(const GalerkinBasis& basis, const std::function<bool(int)>& keep_m) {
    GalerkinBasis out;
    out.grid = basis.grid;
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < basis.n(); ++i) {
        if (!keep_m(basis.mval[i])) continue;
        keep.push_back(Eigen::Index(i));
        out.modes.push_back(basis.modes[i]);
        out.fields.push_back(basis.fields[i]);
        out.mval.push_back(basis.mval[i]);
        out.trig.push_back(basis.trig[i]);
        out.support_lo.push_back(basis.support_lo[i]);
        out.support_hi.push_back(basis.support_hi[i]);
    }
    out.gram.resize(Eigen::Index(keep.size()), Eigen::Index(keep.size()));
    for (std::size_t a = 0; a < keep.size(); ++a)
        for (std::size_t b = 0; b < keep.size(); ++b)
            out.gram(Eigen::Index(a), Eigen::Index(b)) = basis.gram(keep[a], keep[b]);
    return out;
}

}  // namespace

GalerkinBasis restrict_central(const GalerkinBasis& basis) {
    return filter_basis(basis, [](int m) { return m % 2 == 0; });
}

GalerkinBasis restrict_mode(const GalerkinBasis& basis, int m) {
    GalerkinBasis out = filter_basis(basis, [m](int mm) { return mm == m; });
    if (out.n() == 0) throw std::invalid_argument("restrict_mode: no modes at that frequency");
    return out;
}

GalerkinBasis GalerkinBasis::orthonormalized() const {
    GalerkinBasis out;
    out.grid = grid;
    out.mval = mval;
    out.trig = trig;
    out.modes = modes;
    out.fields = fields;
    out.support_lo.assign(n(), 0);
    out.support_hi.assign(n(), grid->n_r());
    // Whiten block-wise: the Gram is block diagonal over (m, trig).
    for (int m = 0; m <= *std::max_element(mval.begin(), mval.end()); ++m) {
        for (int tg = 0; tg < 2; ++tg) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < n(); ++i)
                if (mval[i] == m && trig[i] == tg) idx.push_back(i);
            if (idx.empty()) continue;
            const Eigen::Index nb = Eigen::Index(idx.size());
            Eigen::MatrixXd G(nb, nb);
            for (Eigen::Index a = 0; a < nb; ++a)
                for (Eigen::Index b = 0; b < nb; ++b)
                    G(a, b) = gram(Eigen::Index(idx[std::size_t(a)]),
                                   Eigen::Index(idx[std::size_t(b)]));
            Eigen::LLT<Eigen::MatrixXd> llt(G);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("orthonormalized: Gram block not positive definite");
            // W = L^{-T}: column k gives the k-th orthonormal combination.
            Eigen::MatrixXd W = Eigen::MatrixXd::Identity(nb, nb);
            llt.matrixL().transpose().solveInPlace(W);
            // Combine sampled fields and radial profiles.
            std::vector<VelocityFieldPolar> combo(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) {
                VelocityFieldPolar f = fields[idx[0]];
                const std::size_t nn = f.n_nodes();
                for (auto* ch : {&f.vr, &f.vt, &f.grr, &f.grt, &f.gtr, &f.gtt})
                    std::fill(ch->begin(), ch->end(), 0.0);
                for (std::size_t a = 0; a < idx.size(); ++a) {
                    const double w = W(Eigen::Index(a), Eigen::Index(k));
                    if (w == 0.0) continue;
                    const auto& src = fields[idx[a]];
                    for (std::size_t p = 0; p < nn; ++p) {
                        f.vr[p] += w * src.vr[p];
                        f.vt[p] += w * src.vt[p];
                        f.grr[p] += w * src.grr[p];
                        f.grt[p] += w * src.grt[p];
                        f.gtr[p] += w * src.gtr[p];
                        f.gtt[p] += w * src.gtt[p];
                    }
                }
                combo[k] = std::move(f);

                StreamMode mode = modes[idx[k]];
                std::vector<std::pair<double, RadialProfile>> parts;
                for (std::size_t a = 0; a < idx.size(); ++a) {
                    const double w = W(Eigen::Index(a), Eigen::Index(k));
                    if (w != 0.0)
                        parts.emplace_back(w * modes[idx[a]].amp / mode.amp, modes[idx[a]].prof);
                }
                RadialProfile sum;
                sum.lo = grid->panels.front();
                sum.hi = grid->panels.back();
                sum.f = [parts](double r) {
                    double v = 0.0;
                    for (const auto& p : parts) v += p.first * p.second.f(r);
                    return v;
                };
                sum.d1 = [parts](double r) {
                    double v = 0.0;
                    for (const auto& p : parts) v += p.first * p.second.d1(r);
                    return v;
                };
                sum.d2 = [parts](double r) {
                    double v = 0.0;
                    for (const auto& p : parts) v += p.first * p.second.d2(r);
                    return v;
                };
                mode.prof = sum;
                out.modes[idx[k]] = std::move(mode);
            }
            for (std::size_t k = 0; k < idx.size(); ++k) out.fields[idx[k]] = std::move(combo[k]);
        }
    }
    const std::size_t nn = n();
    out.gram = Eigen::MatrixXd::Zero(Eigen::Index(nn), Eigen::Index(nn));
    for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = i; j < nn; ++j) {
            if (!same_mt(out, i, j)) continue;
            const double g = stiffness_entry(out, i, j);
            out.gram(Eigen::Index(i), Eigen::Index(j)) = g;
            out.gram(Eigen::Index(j), Eigen::Index(i)) = g;
        }
    return out;
}

double criterion_delta_hat(const SteadyFlowParams& ubar) {
    if (ubar.phi == 0.0 && ubar.mu == 0.0 && ubar.amp == 0.0) return 0.0;
    if (ubar.mu == 0.0 && ubar.amp == 0.0) return std::abs(ubar.phi) / (2.0 * M_PI);
    return -1.0;
}

GalerkinSystem assemble_system(std::shared_ptr<const GalerkinBasis> basis,
                               const SteadyFlowParams& ubar) {
    GalerkinSystem sys;
    sys.basis = basis;
    sys.ubar = ubar;
    sys.delta_monitor = criterion_delta_hat(ubar);
    const GalerkinBasis& b = *basis;
    const PolarGrid& g = *b.grid;
    const Eigen::Index n = Eigen::Index(b.n());
    sys.M = Eigen::MatrixXd::Zero(n, n);
    sys.A = Eigen::MatrixXd::Zero(n, n);
    sys.B1 = Eigen::MatrixXd::Zero(n, n);
    sys.B2 = Eigen::MatrixXd::Zero(n, n);
    sys.B2s = Eigen::MatrixXd::Zero(n, n);

    std::vector<PolarVec> u(g.n_r());
    std::vector<PolarMat> du(g.n_r());
    for (std::size_t ir = 0; ir < g.n_r(); ++ir) {
        u[ir] = hamel_velocity(ubar, g.r[ir]);
        du[ir] = hamel_gradient(ubar, g.r[ir]);
    }

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const std::size_t si = std::size_t(i), sj = std::size_t(j);
            if (b.mval[si] != b.mval[sj]) continue;
            const auto& fi = b.fields[si];
            const auto& fj = b.fields[sj];
            if (b.trig[si] == b.trig[sj]) {
                const double m = mass_entry(b, si, sj);
                const double a = stiffness_entry(b, si, sj);
                sys.M(i, j) = sys.M(j, i) = m;
                sys.A(i, j) = sys.A(j, i) = a;
            }
            // (ubar.grad phi_j, phi_i) and (phi_j.grad ubar, phi_i); the
            // theta-derivative part couples cos and sin within a frequency.
            const double b1ij = pair_sum(b, si, sj, [&](std::size_t k, std::size_t ir) {
                const double ar = u[ir].r * fj.grr[k] + u[ir].t * fj.grt[k];
                const double at = u[ir].r * fj.gtr[k] + u[ir].t * fj.gtt[k];
                return ar * fi.vr[k] + at * fi.vt[k];
            });
            const double b1ji = pair_sum(b, si, sj, [&](std::size_t k, std::size_t ir) {
                const double ar = u[ir].r * fi.grr[k] + u[ir].t * fi.grt[k];
                const double at = u[ir].r * fi.gtr[k] + u[ir].t * fi.gtt[k];
                return ar * fj.vr[k] + at * fj.vt[k];
            });
            sys.B1(i, j) = b1ij;
            sys.B1(j, i) = b1ji;
            const double b2ij = pair_sum(b, si, sj, [&](std::size_t k, std::size_t ir) {
                const double ar = fj.vr[k] * du[ir].rr + fj.vt[k] * du[ir].rt;
                const double at = fj.vr[k] * du[ir].tr + fj.vt[k] * du[ir].tt;
                return ar * fi.vr[k] + at * fi.vt[k];
            });
            const double b2ji = pair_sum(b, si, sj, [&](std::size_t k, std::size_t ir) {
                const double ar = fi.vr[k] * du[ir].rr + fi.vt[k] * du[ir].rt;
                const double at = fi.vr[k] * du[ir].tr + fi.vt[k] * du[ir].tt;
                return ar * fj.vr[k] + at * fj.vt[k];
            });
            sys.B2(i, j) = b2ij;
            sys.B2(j, i) = b2ji;
            // a_{L*}'s background term, assembled by its own quadrature.
            sys.B2s(i, j) = b2ji;
            sys.B2s(j, i) = b2ij;
        }
    }
    // The advection matrix is antisymmetric up to quadrature error; record
    // the defect, then antisymmetrize so the discrete energy identity is
    // exact.
    sys.b1_skew_defect = (sys.B1 + sys.B1.transpose()).cwiseAbs().maxCoeff();
    sys.B1 = 0.5 * (sys.B1 - sys.B1.transpose()).eval();
    return sys;
}

Eigen::VectorXd GalerkinSystem::nonlinear(const Eigen::VectorXd& c) const {
    const GalerkinBasis& b = *basis;
    const PolarGrid& g = *b.grid;
    VelocityFieldPolar v = b.reconstruct(c);
    const std::size_t nn = g.n_nodes();
    const std::size_t nt = g.n_theta();
    std::vector<double> adv_r(nn), adv_t(nn);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::size_t k = 0; k < nn; ++k) {
        adv_r[k] = v.vr[k] * v.grr[k] + v.vt[k] * v.grt[k];
        adv_t[k] = v.vr[k] * v.gtr[k] + v.vt[k] * v.gtt[k];
    }
    Eigen::VectorXd out(Eigen::Index(b.n()));
    // N_i = ((v.grad v, phi_i) - (v.grad phi_i, v)) / 2: the antisymmetrized
    // pairing vanishes against v itself to rounding, which is the discrete
    // face of the cancellation the energy estimate rests on.
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t i = 0; i < b.n(); ++i) {
        const auto& f = b.fields[i];
        double q = 0.0, p = 0.0;
        for (std::size_t ir = b.support_lo[i]; ir < b.support_hi[i]; ++ir) {
            double qrow = 0.0, prow = 0.0;
            for (std::size_t it = 0; it < nt; ++it) {
                const std::size_t k = ir * nt + it;
                qrow += adv_r[k] * f.vr[k] + adv_t[k] * f.vt[k];
                const double pr = v.vr[k] * f.grr[k] + v.vt[k] * f.grt[k];
                const double pt = v.vr[k] * f.gtr[k] + v.vt[k] * f.gtt[k];
                prow += pr * v.vr[k] + pt * v.vt[k];
            }
            q += g.wr[ir] * g.wtheta * qrow;
            p += g.wr[ir] * g.wtheta * prow;
        }
        out(Eigen::Index(i)) = 0.5 * (q - p);
    }
    return out;
}

double GalerkinSystem::energy(const Eigen::VectorXd& c) const { return c.dot(M * c); }
double GalerkinSystem::h1sq(const Eigen::VectorXd& c) const { return c.dot(A * c); }

Scheme scheme_from_name(const std::string& name) {
    if (name == "implicit_midpoint") return Scheme::implicit_midpoint;
    if (name == "imex_cn_ab2") return Scheme::imex_cn_ab2;
    throw std::invalid_argument("unknown scheme: " + name);
}

std::string scheme_name(Scheme s) {
    return s == Scheme::implicit_midpoint ? "implicit_midpoint" : "imex_cn_ab2";
}

SpectralState step(const GalerkinSystem& sys, const SpectralState& state, double dt,
                   Scheme scheme) {
    if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
    SpectralState next;
    next.t = state.t + dt;
    if (scheme == Scheme::implicit_midpoint) {
        const Eigen::MatrixXd K = sys.K();
        const Eigen::MatrixXd lhs = sys.M + 0.5 * dt * K;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
        const Eigen::VectorXd rhs0 = (sys.M - 0.5 * dt * K) * state.xi;
        Eigen::VectorXd xi = state.xi;
        const double scale = std::max(1.0, state.xi.norm());
        bool done = false;
        for (int it = 0; it < 50; ++it) {
            const Eigen::VectorXd mid = 0.5 * (state.xi + xi);
            Eigen::VectorXd cand = lu.solve(rhs0 - dt * sys.nonlinear(mid));
            const double delta = (cand - xi).norm();
            xi = std::move(cand);
            if (delta <= 1e-12 * scale) {
                done = true;
                break;
            }
        }
        if (!done) {
            std::ostringstream msg;
            msg << "step t=" << format_double(state.t)
                << ": midpoint fixed point did not converge in 50 iterations";
            throw std::runtime_error(msg.str());
        }
        next.xi = std::move(xi);
    } else {
        const Eigen::VectorXd gn = (sys.B1 + sys.B2) * state.xi + sys.nonlinear(state.xi);
        const Eigen::VectorXd gext =
            state.prev_rhs.size() == gn.size() ? (1.5 * gn - 0.5 * state.prev_rhs).eval() : gn;
        const Eigen::MatrixXd lhs = sys.M + 0.5 * dt * sys.A;
        const Eigen::VectorXd rhs = (sys.M - 0.5 * dt * sys.A) * state.xi - dt * gext;
        next.xi = Eigen::PartialPivLU<Eigen::MatrixXd>(lhs).solve(rhs);
        next.prev_rhs = gn;
    }
    return next;
}

CsvTable EnergyTrace::to_csv() const {
    CsvTable csv({"t", "energy", "dissipation", "residual"});
    csv.add_comment("anchors: eq:energy-inequality (||v(t)||^2 + (1-delta) int ||grad v||^2 "
                    "<= ||v0||^2)");
    csv.add_comment("delta_monitor = " + format_double(delta_monitor));
    for (std::size_t i = 0; i < t.size(); ++i)
        csv.add_row({t[i], energy[i], dissipation[i], residual[i]});
    return csv;
}

EnergyTrace simulate_system(const GalerkinSystem& sys, const Eigen::VectorXd& xi0, double T,
                            double dt, Scheme scheme) {
    if (T < 0.0) throw std::invalid_argument("simulate: negative horizon");
    if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
    const bool central = sys.basis->centrally_symmetric();

    EnergyTrace trace;
    trace.delta_monitor = sys.delta_monitor;
    trace.delta_warning = sys.delta_monitor < 0.0 || sys.delta_monitor >= 1.0;
    const double dhat = std::max(sys.delta_monitor, 0.0);

    SpectralState state;
    state.xi = xi0;
    state.t = 0.0;

    trace.t.push_back(0.0);
    trace.energy.push_back(sys.energy(state.xi));
    trace.dissipation.push_back(0.0);
    trace.residual.push_back(0.0);
    trace.grad_norm.push_back(std::sqrt(std::max(0.0, sys.h1sq(state.xi))));
    if (central) trace.max_central_defect = central_defect(sys.basis->reconstruct(state.xi));

    const long n_steps = T > 0.0 ? std::max<long>(1, std::lround(T / dt)) : 0;
    const double dt_eff = n_steps > 0 ? T / double(n_steps) : dt;
    double dissipation = 0.0;
    for (long k = 0; k < n_steps; ++k) {
        SpectralState nxt = step(sys, state, dt_eff, scheme);
        const Eigen::VectorXd mid = 0.5 * (state.xi + nxt.xi);
        const double g_mid = sys.h1sq(mid);
        const double e_prev = trace.energy.back();
        const double e_now = sys.energy(nxt.xi);
        dissipation += dt_eff * g_mid;
        trace.t.push_back(nxt.t);
        trace.energy.push_back(e_now);
        trace.dissipation.push_back(dissipation);
        trace.residual.push_back(e_now - e_prev + (1.0 - dhat) * dt_eff * g_mid);
        trace.grad_norm.push_back(std::sqrt(std::max(0.0, sys.h1sq(nxt.xi))));
        if (g_mid > 0.0) {
            const double cancel = std::abs(mid.dot(sys.nonlinear(mid)));
            trace.max_cancellation = std::max(trace.max_cancellation, cancel / g_mid);
        }
        if (central && (k % 5 == 4 || k + 1 == n_steps)) {
            trace.max_central_defect = std::max(trace.max_central_defect,
                                                central_defect(sys.basis->reconstruct(nxt.xi)));
        }
        state = std::move(nxt);
    }
    return trace;
}

EnergyTrace simulate(const StreamField& v0, const SteadyFlowParams& ubar, double T,
                     const SimulateOptions& opts) {
    if (T < 0.0) throw std::invalid_argument("simulate: negative horizon");
    if (!(opts.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
    const int J = opts.n_modes_radial;
    const int M = opts.n_modes_theta;
    // Trapezoid quadrature integrates trig products exactly while the top
    // aliased frequency 3M stays below n_theta, so the trilinear terms see
    // no angular discretization error.
    std::size_t n_theta = std::max<std::size_t>(16, std::size_t(3 * M + 4));
    if (n_theta % 2 == 1) ++n_theta;
    auto grid = std::make_shared<PolarGrid>(
        build_polar_grid(opts.r_max, std::size_t(6 * (J + 1)), n_theta, Stretch::geometric, 6));
    GalerkinBasis full = build_galerkin_basis(grid, M, J);
    auto basis = std::make_shared<GalerkinBasis>(opts.central ? restrict_central(full)
                                                              : std::move(full));
    GalerkinSystem sys = assemble_system(basis, ubar);
    const Eigen::VectorXd xi0 = basis->project(stream_to_velocity(v0, grid));
    return simulate_system(sys, xi0, T, opts.dt, opts.scheme);
}

namespace {

std::vector<std::vector<std::size_t>> m_blocks(const GalerkinBasis& b) {
    std::vector<std::vector<std::size_t>> blocks;
    const int m_max = *std::max_element(b.mval.begin(), b.mval.end());
    for (int m = 0; m <= m_max; ++m) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < b.n(); ++i)
            if (b.mval[i] == m) idx.push_back(i);
        if (!idx.empty()) blocks.push_back(std::move(idx));
    }
    return blocks;
}

Eigen::MatrixXd sub(const Eigen::MatrixXd& X, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(Eigen::Index(idx.size()), Eigen::Index(idx.size()));
    for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = 0; b < idx.size(); ++b)
            out(Eigen::Index(a), Eigen::Index(b)) =
                X(Eigen::Index(idx[a]), Eigen::Index(idx[b]));
    return out;
}

}  // namespace

Eigen::VectorXd semigroup_apply_coeffs(const GalerkinSystem& sys, const Eigen::VectorXd& c0,
                                       double t, Generator which) {
    if (t < 0.0) throw std::invalid_argument("semigroup_apply: negative time");
    const Eigen::MatrixXd K = which == Generator::L ? sys.K() : sys.K_star();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(c0.size());
    for (const auto& idx : m_blocks(*sys.basis)) {
        const Eigen::MatrixXd Mb = sub(sys.M, idx);
        const Eigen::MatrixXd Kb = sub(K, idx);
        Eigen::VectorXd cb(Eigen::Index(idx.size()));
        for (std::size_t a = 0; a < idx.size(); ++a) cb(Eigen::Index(a)) = c0(Eigen::Index(idx[a]));
        const Eigen::MatrixXd gen = Eigen::PartialPivLU<Eigen::MatrixXd>(Mb).solve(Kb);
        const Eigen::VectorXd ct = (-t * gen).exp() * cb;
        for (std::size_t a = 0; a < idx.size(); ++a) out(Eigen::Index(idx[a])) = ct(Eigen::Index(a));
    }
    return out;
}

VelocityFieldPolar semigroup_apply(const GalerkinSystem& sys, const VelocityFieldPolar& v0,
                                   double t, Generator which) {
    return sys.basis->reconstruct(semigroup_apply_coeffs(sys, sys.basis->project(v0), t, which));
}

SlopeFit semigroup_gradient_slope(const GalerkinSystem& sys, const std::vector<double>& ts) {
    if (ts.size() < 2) throw std::invalid_argument("gradient slope: need at least two times");
    SlopeFit fit;
    const auto blocks = m_blocks(*sys.basis);
    const Eigen::MatrixXd Ks = sys.K_star();
    for (double t : ts) {
        double best = 0.0;
        for (const auto& idx : blocks) {
            const Eigen::MatrixXd Mb = sub(sys.M, idx);
            const Eigen::MatrixXd Ab = sub(sys.A, idx);
            const Eigen::MatrixXd Kb = sub(Ks, idx);
            const Eigen::MatrixXd gen = Eigen::PartialPivLU<Eigen::MatrixXd>(Mb).solve(Kb);
            const Eigen::MatrixXd E = (-t * gen).exp();
            // Operator norm L2 -> H1: lambda_max of E^T A E y = lambda M y.
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
                (E.transpose() * Ab * E).eval(), Mb);
            best = std::max(best, es.eigenvalues().maxCoeff());
        }
        fit.t.push_back(t);
        fit.value.push_back(std::sqrt(std::max(0.0, best)));
    }
    // Least squares on the log-log samples.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(fit.t.size());
    for (std::size_t i = 0; i < fit.t.size(); ++i) {
        const double x = std::log(fit.t[i]);
        const double y = std::log(fit.value[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

std::vector<double> cesaro_average(const EnergyTrace& trace) {
    if (trace.t.empty()) return {};
    std::vector<double> avg(trace.t.size());
    avg[0] = std::sqrt(std::max(0.0, trace.energy[0]));
    double acc = 0.0;
    for (std::size_t i = 1; i < trace.t.size(); ++i) {
        const double a = std::sqrt(std::max(0.0, trace.energy[i - 1]));
        const double b = std::sqrt(std::max(0.0, trace.energy[i]));
        acc += 0.5 * (a + b) * (trace.t[i] - trace.t[i - 1]);
        avg[i] = trace.t[i] > 0.0 ? acc / trace.t[i] : avg[0];
    }
    return avg;
}

double measure_nonlinear_bound(const GalerkinSystem& sys, int n_samples,
                               const std::vector<double>& ts, std::uint64_t seed) {
    const Eigen::Index n = Eigen::Index(sys.basis->n());
    double worst = 0.0;
    for (int s = 0; s < n_samples; ++s) {
        SplitMix64 rng = substream(seed, std::uint64_t(s));
        Eigen::VectorXd cv(n), cw(n);
        for (Eigen::Index i = 0; i < n; ++i) cv(i) = rng.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) cw(i) = rng.uniform(-1.0, 1.0);
        const double nv = std::sqrt(std::max(0.0, sys.energy(cv)));
        const double gv = std::sqrt(std::max(0.0, sys.h1sq(cv)));
        const double nw = std::sqrt(std::max(0.0, sys.energy(cw)));
        if (nv == 0.0 || gv == 0.0 || nw == 0.0) continue;
        const Eigen::VectorXd nl = sys.nonlinear(cv);
        for (double t : ts) {
            const Eigen::VectorXd z = semigroup_apply_coeffs(sys, cw, t, Generator::L_star);
            const double pairing = std::abs(z.dot(nl));
            worst = std::max(worst, pairing * std::sqrt(t) / (nv * gv * nw));
        }
    }
    return worst;
}

}  // namespace exflow
