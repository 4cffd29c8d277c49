#pragma once
// Discrete norms and the quadratic/trilinear forms of the stability
// analysis: the quotient B(v) = (v.grad v, ubar) / ||grad v||^2, Hardy
// quotients with and without the log weight, shell-wise Poincare constants,
// and a randomized ascent estimator for delta* = sup_v B(v).

#include <cstdint>
#include <string>
#include <vector>

#include "exflow/common.hpp"
#include "exflow/geometry.hpp"
#include "exflow/steady.hpp"
#include "exflow/stream.hpp"

namespace exflow {

double l2_norm(const VelocityFieldPolar& v);
double h1_seminorm(const VelocityFieldPolar& v);

// Integral of (a.grad b) . c over the grid annulus. b must carry its
// gradient channel. Fields of compact support inside the annulus make the
// truncation exact; slowly decaying tails are the caller's concern (the
// improper-integral path in the counterexample module handles those).
double trilinear(const VelocityFieldPolar& a, const VelocityFieldPolar& b,
                 const VelocityFieldPolar& c);
// Same with the closed-form steady field as third slot.
double trilinear_steady(const VelocityFieldPolar& a, const VelocityFieldPolar& b,
                        const SteadyFlowParams& ubar);

// B(v) against a steady background.
double hypothesis_ratio(const StreamField& v, const SteadyFlowParams& ubar,
                        std::shared_ptr<const PolarGrid> grid);

// || v / (r log r) ||_2 / ||grad v||_2. The weight is singular at r = 1,
// so v must vanish on a collar there (throws otherwise).
double hardy_quotient_log(const VelocityFieldPolar& v);
// || v / r ||_2 / ||grad v||_2 (no collar needed; meaningful for the
// centrally symmetric class).
double hardy_quotient_central(const VelocityFieldPolar& v);

// Largest central Hardy quotient over a centrally symmetric stream basis
// on the grid: a Rayleigh maximization used as the measured constant C.
double measure_central_hardy_constant(std::shared_ptr<const PolarGrid> grid, int m_max,
                                      int n_radial);

// Per-shell |x|-weighted Poincare-type constants: for each shell the
// largest ||v/|x|||^2 / ||grad v||^2 over probe fields supported in that
// shell (zero-mean comes free: probes are stream fields vanishing on the
// shell boundary). Both members are scale-invariant in 2-D, so dyadic
// shells share one constant.
struct ShellPoincare {
    std::vector<double> per_shell;
    double c0 = 0.0;        // collar shell S_0
    double c1 = 0.0;        // first dyadic shell
    double combined = 0.0;  // max over shells
};
ShellPoincare shell_poincare_constants(const ShellDecomposition& shells,
                                       std::shared_ptr<const PolarGrid> grid, int probes_per_shell,
                                       std::uint64_t seed);

enum class Verdict { satisfied_by_criterion, refuted_by_witness, inconclusive };
std::string verdict_name(Verdict v);

struct HypothesisReport {
    double delta_hat = 0.0;        // best found quotient
    StreamField certificate_field; // field achieving delta_hat
    WeightedSup sup_subcritical;   // criterion values from the steady module
    WeightedSup sup_critical;
    double criterion_delta = -1.0; // certified delta when a criterion applies, else -1
    Verdict verdict = Verdict::inconclusive;
    bool converged = true;
    std::vector<double> trial_values;  // best-so-far after each trial
    double witness_alpha = 0.0;        // spiral witness parameter when refuted by the family

    std::string to_text() const;  // flat key=value record
    CsvTable trials_csv() const;  // (trial, delta_hat)
};

struct DeltaSearch {
    std::uint64_t seed = 1;
    int n_random = 24;
    int ascent_steps = 80;
    int basis_m = 4;     // angular modes 0..basis_m
    int basis_j = 10;    // radial windows per angular mode
    bool central_only = false;
};

// Lower-bound estimator for delta* by best-of random starts plus exact
// two-dimensional subspace ascent on the generalized Rayleigh quotient in
// stream-coefficient space. Deterministic given the seed; enlarging
// n_random never decreases delta_hat (per-trial substreams).
HypothesisReport estimate_delta_star(const SteadyFlowParams& ubar,
                                     std::shared_ptr<const PolarGrid> grid,
                                     const DeltaSearch& search);

}  // namespace exflow
