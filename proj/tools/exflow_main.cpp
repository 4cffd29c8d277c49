// exflow: experiment commands over the steady-flow, counterexample,
// evolution, and kernel modules. Every command reads the same flat config
// (flags override --config file values), writes CSV artifacts atomically,
// and is deterministic for a fixed config; OMP_NUM_THREADS is the only
// environment influence (worker count).

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exflow/common.hpp"
#include "exflow/config.hpp"
#include "exflow/counterexample.hpp"
#include "exflow/evolution.hpp"
#include "exflow/functionals.hpp"
#include "exflow/geometry.hpp"
#include "exflow/kernel.hpp"
#include "exflow/steady.hpp"
#include "exflow/stream.hpp"

namespace {

using namespace exflow;

constexpr int kExitUsage = 64;

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

std::shared_ptr<const PolarGrid> field_grid(const ExperimentConfig& cfg, std::size_t n_r) {
    std::size_t n_theta = std::max<std::size_t>(16, std::size_t(3 * cfg.n_modes_theta + 4));
    if (n_theta % 2 == 1) ++n_theta;
    return std::make_shared<const PolarGrid>(
        build_polar_grid(cfg.r_max, n_r, n_theta, Stretch::geometric, 4));
}

int cmd_check_hypothesis(const ExperimentConfig& cfg) {
    auto grid = field_grid(cfg, std::size_t(8 * std::max(12, cfg.n_modes_radial)));
    DeltaSearch search;
    search.seed = cfg.seed;
    search.basis_m = cfg.n_modes_theta;
    search.basis_j = cfg.n_modes_radial;
    search.central_only = cfg.central;
    HypothesisReport rep = estimate_delta_star(cfg.steady(), grid, search);

    std::cout << rep.to_text();
    const std::string trials = out_path(cfg, "hypothesis_trials.csv");
    rep.trials_csv().write(trials);
    std::cout << "trials_csv=" << trials << "\n";

    switch (rep.verdict) {
        case Verdict::satisfied_by_criterion: return 0;
        case Verdict::refuted_by_witness: return 2;
        case Verdict::inconclusive: return 1;
    }
    return 1;
}

int cmd_counterexample_scan(const ExperimentConfig& cfg) {
    if (cfg.alphas.empty())
        throw std::invalid_argument("alpha list is empty (set --alpha or the alphas key)");
    // mu = 0 would pair to nothing; default to the unit rotation 2*pi.
    const double mu = cfg.mu != 0.0 ? cfg.mu : 2.0 * M_PI;

    std::vector<RatioRow> rows = ratio_scan(cfg.alphas, mu);
    CsvTable csv = ratio_scan_csv(rows, mu);
    const std::string path = out_path(cfg, "counterexample_scan.csv");
    csv.write(path);
    std::cout << "scan_csv=" << path << "\n";

    int failures = 0;
    for (const RatioRow& row : rows) {
        const double a = row.alpha;
        const double closed_grad = 4.0 * M_PI;
        const double closed_pair =
            mu / (2.0 * M_PI) * M_PI * std::sin(2.0 * a) / (2.0 - 2.0 * std::cos(a));
        const double pair = pairing_ualpha(a, mu);
        const double err_grad = std::abs(row.grad_energy - closed_grad) / closed_grad;
        const double err_pair = std::abs(pair - closed_pair) / std::abs(closed_pair);
        const double err_k = k_alpha_identity_residual(a) * (4.0 - 4.0 * std::cos(a));
        const bool ok = err_grad <= cfg.tol && err_pair <= cfg.tol && err_k <= cfg.tol &&
                        row.converged;
        if (!ok) ++failures;
        std::cout << "alpha=" << format_double(a) << " B=" << format_double(row.B)
                  << " grad_energy_rel_err=" << format_double(err_grad)
                  << " pairing_rel_err=" << format_double(err_pair)
                  << " k_identity_rel_err=" << format_double(err_k)
                  << (ok ? " ok" : " FAIL") << "\n";
    }
    if (failures > 0) {
        std::cerr << "counterexample-scan: " << failures
                  << " alpha value(s) exceeded tolerance " << format_double(cfg.tol) << "\n";
        return 1;
    }
    return 0;
}

int cmd_simulate(const ExperimentConfig& cfg) {
    // Draw the initial perturbation on a fixed sampling grid (supports snap
    // to its panels); the integrator builds its own grid from the options.
    auto draw = field_grid(cfg, 48);
    RandomFieldParams fp;
    fp.n_modes = 4;
    fp.m_max = std::min(4, cfg.n_modes_theta);
    fp.central_only = cfg.central;
    StreamField v0 = random_stream_field(cfg.seed, 0, *draw, fp);
    const double n0 = l2_norm(stream_to_velocity(v0, draw));
    if (n0 > 0.0)
        for (StreamMode& m : v0.modes) m.amp /= n0;

    EnergyTrace trace = simulate(v0, cfg.steady(), cfg.T, cfg.simulate_options());
    const std::string path = out_path(cfg, "energy_trace.csv");
    trace.to_csv().write(path);

    const double e0 = trace.energy.front();
    std::cout << "trace_csv=" << path << "\n";
    std::cout << "rows=" << trace.t.size() << "\n";
    std::cout << "delta_monitor=" << format_double(trace.delta_monitor) << "\n";
    if (trace.delta_warning)
        std::cout << "warning=no a priori coercivity criterion for this background\n";
    std::cout << "initial_energy=" << format_double(e0) << "\n";
    std::cout << "terminal_energy=" << format_double(trace.energy.back()) << "\n";
    std::cout << "max_cancellation=" << format_double(trace.max_cancellation) << "\n";
    if (trace.max_central_defect >= 0.0)
        std::cout << "max_central_defect=" << format_double(trace.max_central_defect) << "\n";

    // Per-step energy inequality (only meaningful when a criterion exists).
    if (!trace.delta_warning) {
        for (std::size_t i = 1; i < trace.t.size(); ++i) {
            if (trace.residual[i] > 1e-8 * std::max(trace.energy[i - 1], 1e-300)) {
                std::cerr << "simulate: energy inequality violated at t="
                          << format_double(trace.t[i])
                          << " residual=" << format_double(trace.residual[i]) << "\n";
                return 1;
            }
        }
        std::cout << "energy_inequality=ok\n";
    }
    return 0;
}

int cmd_kernel_demo(const ExperimentConfig& cfg) {
    const KernelProbe probe = step_probe();
    CsvTable csv = kernel_csv(probe);
    const std::string path = out_path(cfg, "kernel_demo.csv");
    csv.write(path);
    std::cout << "kernel_csv=" << path << "\n";

    int failures = 0;
    for (double t : {2.0, 8.0, 32.0}) {
        const double got = kernel_average(probe, t);
        const double want =
            4.0 / 3.0 * (std::pow(t, 1.5) - std::pow(t - 1.0, 1.5)) / t;
        const double rel = std::abs(got - want) / want;
        const bool ok = rel <= std::max(cfg.tol, 1e-10);
        if (!ok) ++failures;
        std::cout << "t=" << format_double(t) << " I=" << format_double(got)
                  << " closed_form=" << format_double(want)
                  << " rel_err=" << format_double(rel) << (ok ? " ok" : " FAIL") << "\n";
    }
    if (failures > 0) {
        std::cerr << "kernel-demo: closed-form check failed\n";
        return 1;
    }
    return 0;
}

int cmd_hardy_test(const ExperimentConfig& cfg) {
    if (cfg.n_fields < 1) throw std::invalid_argument("n_fields must be positive");
    auto grid = field_grid(cfg, 96);

    RandomFieldParams collar;
    collar.r_lo = 1.5;  // log weight is singular at r = 1; keep a clean collar
    RandomFieldParams central;
    central.central_only = true;

    CsvTable csv({"field", "hardy_log", "hardy_central"});
    csv.add_comment("anchors: lemma hardy (log quotient <= 2), eq:hardy-central");
    double max_log = 0.0, max_central = 0.0;
    for (int i = 0; i < cfg.n_fields; ++i) {
        const StreamField fl =
            random_stream_field(cfg.seed, std::uint64_t(i), *grid, collar);
        const StreamField fc =
            random_stream_field(cfg.seed, std::uint64_t(cfg.n_fields + i), *grid, central);
        const double ql = hardy_quotient_log(stream_to_velocity(fl, grid));
        const double qc = hardy_quotient_central(stream_to_velocity(fc, grid));
        max_log = std::max(max_log, ql);
        max_central = std::max(max_central, qc);
        csv.add_row({double(i), ql, qc});
    }
    const std::string path = out_path(cfg, "hardy_quotients.csv");
    csv.write(path);

    std::cout << "quotients_csv=" << path << "\n";
    std::cout << "n_fields=" << cfg.n_fields << "\n";
    std::cout << "max_log_quotient=" << format_double(max_log) << "\n";
    std::cout << "max_central_quotient=" << format_double(max_central) << "\n";
    if (max_log > 2.0) {
        std::cerr << "hardy-test: log quotient exceeded the bound 2\n";
        return 1;
    }
    std::cout << "log_bound=ok\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    ExperimentConfig cfg;
    std::string command = argc > 1 && argv[1][0] != '-' ? argv[1] : "exflow";

    // Config file first, flags after: flags win.
    try {
        for (int i = 1; i < argc; ++i) {
            const std::string a = argv[i];
            if (a == "--config" && i + 1 < argc)
                apply_config_file(cfg, argv[i + 1]);
            else if (a.rfind("--config=", 0) == 0)
                apply_config_file(cfg, a.substr(9));
        }
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitUsage;
    }

    std::string scheme_str = scheme_name(cfg.scheme);
    std::string symmetry_str = cfg.central ? "central" : "none";

    CLI::App app{
        "Exterior-domain flow experiments.\n"
        "Exit codes: 0 success (check-hypothesis: satisfied by criterion);\n"
        "1 verification failure or inconclusive; 2 hypothesis refuted with a\n"
        "recorded witness; 64 usage error or malformed config."};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", "config file with key=value lines (applied before flags)")
            ->option_text("FILE");
        sub->add_option("--phi", cfg.phi, "flux of the steady background");
        sub->add_option("--mu", cfg.mu, "rotation of the steady background");
        sub->add_option("--amp", cfg.amp, "amplitude of the gamma mode");
        sub->add_option("--r-max", cfg.r_max, "truncation radius");
        sub->add_option("--n-modes-theta", cfg.n_modes_theta, "angular modes 0..M");
        sub->add_option("--n-modes-radial", cfg.n_modes_radial, "radial shapes per mode");
        sub->add_option("--dt", cfg.dt, "time step");
        sub->add_option("--T", cfg.T, "final time");
        sub->add_option("--scheme", scheme_str, "implicit_midpoint or imex_cn_ab2");
        sub->add_option("--symmetry", symmetry_str, "none or central")
            ->check(CLI::IsMember({"none", "central"}));
        sub->add_option("--seed", cfg.seed, "seed for every stochastic draw");
        sub->add_option("--alpha", cfg.alphas, "spiral family parameter (repeatable)");
        sub->add_option("--tol", cfg.tol, "closed-form verification tolerance");
        sub->add_option("--n-fields", cfg.n_fields, "random fields in hardy-test");
        sub->add_option("--out-dir", cfg.out_dir, "directory for CSV artifacts");
        return sub;
    };

    CLI::App* c_hyp = add_common(app.add_subcommand(
        "check-hypothesis", "stability criterion / witness search for the background"));
    CLI::App* c_scan = add_common(app.add_subcommand(
        "counterexample-scan", "spiral-family quotient scan with closed-form checks"));
    CLI::App* c_sim = add_common(app.add_subcommand(
        "simulate", "integrate a random perturbation and write the energy trace"));
    CLI::App* c_ker = add_common(app.add_subcommand(
        "kernel-demo", "kernel averages of the step probe with closed-form checks"));
    CLI::App* c_hdy = add_common(app.add_subcommand(
        "hardy-test", "weighted Hardy quotients over random fields"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        cfg.scheme = scheme_from_name(scheme_str);
        cfg.central = symmetry_str == "central";
        if (!(cfg.r_max > 1.0)) throw std::invalid_argument("r_max must exceed 1");
        if (cfg.n_modes_theta < 0 || cfg.n_modes_radial < 4)
            throw std::invalid_argument("need n_modes_theta >= 0 and n_modes_radial >= 4");
        if (!(cfg.dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (cfg.T < 0.0) throw std::invalid_argument("T must be nonnegative");
        if (!(cfg.tol > 0.0)) throw std::invalid_argument("tol must be positive");
        std::filesystem::create_directories(cfg.out_dir);
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (c_hyp->parsed()) return cmd_check_hypothesis(cfg);
        if (c_scan->parsed()) return cmd_counterexample_scan(cfg);
        if (c_sim->parsed()) return cmd_simulate(cfg);
        if (c_ker->parsed()) return cmd_kernel_demo(cfg);
        if (c_hdy->parsed()) return cmd_hardy_test(cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}
