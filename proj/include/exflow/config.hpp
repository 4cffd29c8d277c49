#pragma once
// Run configuration for the experiment commands: one flat key=value record
// covering the steady background, discretization sizes, time stepping, and
// the knobs of the scan/test commands. A config file and command-line flags
// write the same fields; flags win because they are applied last.

#include <cstdint>
#include <string>
#include <vector>

#include "exflow/evolution.hpp"
#include "exflow/steady.hpp"

namespace exflow {

struct ExperimentConfig {
    // Steady background ubar_{phi, mu, amp}.
    double phi = 0.0;
    double mu = 0.0;
    double amp = 0.0;

    // Discretization and time stepping.
    double r_max = 8.0;
    int n_modes_theta = 6;
    int n_modes_radial = 12;
    double dt = 0.02;
    double T = 10.0;
    Scheme scheme = Scheme::implicit_midpoint;
    bool central = false;  // symmetry = none | central
    std::uint64_t seed = 1;

    // Command knobs.
    std::vector<double> alphas{0.8, 0.4, 0.2, 0.1};
    double tol = 1e-6;   // closed-form verification tolerance
    int n_fields = 500;  // random fields in hardy-test
    std::string out_dir = ".";

    SteadyFlowParams steady() const { return {phi, mu, amp}; }
    SimulateOptions simulate_options() const;
};

// Applies one key=value pair. Throws std::invalid_argument on an unknown
// key or an unparseable value (the CLI maps that to the usage exit code).
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Parses key=value lines; '#' starts a comment, blank lines are skipped.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);

// Loads a file through apply_config_text. Throws std::invalid_argument when
// the file cannot be read.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

// Round-trip serialization of every key (stable order, 17-digit floats).
std::string config_to_text(const ExperimentConfig& cfg);

}  // namespace exflow
