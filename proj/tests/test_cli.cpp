#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed binary end to end: exit codes, CSV artifacts,
// determinism. EXFLOW_BIN is injected by the build.

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(EXFLOW_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult res;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) res.output.append(buf, got);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("exflow_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t data_rows(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::size_t rows = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        ++rows;
    }
    return rows;
}

}  // namespace

TEST_CASE("help documents the exit code contract") {
    RunResult r = run("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("64") != std::string::npos);
    CHECK(r.output.find("check-hypothesis") != std::string::npos);
    CHECK(r.output.find("simulate") != std::string::npos);
}

TEST_CASE("usage errors exit with 64") {
    CHECK(run("").exit_code == 64);
    CHECK(run("no-such-command").exit_code == 64);
    CHECK(run("simulate --no-such-flag 1").exit_code == 64);
    CHECK(run("simulate --scheme euler --T 0").exit_code == 64);
    CHECK(run("simulate --dt 0 --T 1").exit_code == 64);
    CHECK(run("counterexample-scan --symmetry sideways").exit_code == 64);
}

TEST_CASE("malformed or unknown config keys exit with 64") {
    TempDir dir;
    const fs::path good = dir.path / "good.cfg";
    const fs::path bad_key = dir.path / "bad_key.cfg";
    const fs::path bad_line = dir.path / "bad_line.cfg";
    std::ofstream(good) << "phi=3.141592653589793\n# comment\nseed=7\n";
    std::ofstream(bad_key) << "phii=3.14\n";
    std::ofstream(bad_line) << "phi 3.14\n";

    RunResult unknown = run("check-hypothesis --config " + bad_key.string());
    CHECK(unknown.exit_code == 64);
    CHECK(unknown.output.find("unknown key") != std::string::npos);
    CHECK(unknown.output.find("check-hypothesis:") != std::string::npos);
    CHECK(run("check-hypothesis --config " + bad_line.string()).exit_code == 64);
    CHECK(run("check-hypothesis --config " + (dir.path / "missing.cfg").string()).exit_code == 64);

    // A readable config with a pure-flux background satisfies the criterion.
    RunResult ok = run("check-hypothesis --config " + good.string() +
                       " --n-modes-theta 2 --n-modes-radial 5 --out-dir " + dir.str());
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("satisfied_by_criterion") != std::string::npos);
}

TEST_CASE("check-hypothesis exit codes match the verdicts") {
    TempDir dir;
    const std::string small =
        " --n-modes-theta 3 --n-modes-radial 6 --out-dir " + dir.str();

    RunResult flux = run("check-hypothesis --phi 3.14159 --mu 0 --amp 0" + small);
    CHECK(flux.exit_code == 0);
    CHECK(flux.output.find("satisfied_by_criterion") != std::string::npos);
    CHECK(flux.output.find("criterion_delta=0.49999") != std::string::npos);

    RunResult zero = run("check-hypothesis --phi 0 --mu 0 --amp 0" + small);
    CHECK(zero.exit_code == 0);
    CHECK(zero.output.find("criterion_delta=0\n") != std::string::npos);

    RunResult rot = run("check-hypothesis --phi 0 --mu 6.2832 --amp 0" + small);
    CHECK(rot.exit_code == 2);
    CHECK(rot.output.find("refuted_by_witness") != std::string::npos);
    CHECK(rot.output.find("witness_alpha=") != std::string::npos);
    CHECK(fs::exists(dir.path / "hypothesis_trials.csv"));

    // Flags override the config file: the file's rotation is cancelled.
    const fs::path cfg = dir.path / "rot.cfg";
    std::ofstream(cfg) << "mu=6.2832\n";
    RunResult cancel = run("check-hypothesis --config " + cfg.string() + " --mu 0" + small);
    CHECK(cancel.exit_code == 0);
}

TEST_CASE("counterexample-scan verifies closed forms and is deterministic") {
    TempDir dir;
    RunResult r = run("counterexample-scan --out-dir " + dir.str());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("FAIL") == std::string::npos);

    const fs::path csv = dir.path / "counterexample_scan.csv";
    REQUIRE(fs::exists(csv));
    const std::string first = slurp(csv);
    CHECK(data_rows(first) == 4);
    CHECK(first.find("eq:ualpha-int1") != std::string::npos);
    CHECK(first.find("eq:ualpha-int2") != std::string::npos);
    CHECK(first.find("alpha,k_alpha,B") != std::string::npos);

    // Byte-identical rerun.
    CHECK(run("counterexample-scan --out-dir " + dir.str()).exit_code == 0);
    CHECK(slurp(csv) == first);

    // Restricted list and loosened tolerance still pass.
    RunResult one = run("counterexample-scan --alpha 0.7 --tol 1e-3 --out-dir " + dir.str());
    CHECK(one.exit_code == 0);
    CHECK(data_rows(slurp(csv)) == 1);

    // An empty alpha list is a usage error; only the config file can make one.
    const fs::path cfg = dir.path / "empty.cfg";
    std::ofstream(cfg) << "alphas=\n";
    RunResult empty = run("counterexample-scan --config " + cfg.string());
    CHECK(empty.exit_code == 64);
    CHECK(empty.output.find("alpha list is empty") != std::string::npos);
}

TEST_CASE("simulate writes the expected trace artifact") {
    TempDir dir;
    const std::string base =
        "simulate --phi 3.141592653589793 --r-max 6 --n-modes-theta 2 --n-modes-radial 6 "
        "--dt 0.05 --out-dir " +
        dir.str();

    RunResult r = run(base + " --T 0.5");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("delta_monitor=0.5") != std::string::npos);
    CHECK(r.output.find("energy_inequality=ok") != std::string::npos);

    const fs::path csv = dir.path / "energy_trace.csv";
    REQUIRE(fs::exists(csv));
    std::string text = slurp(csv);
    CHECK(text.find("t,energy,dissipation,residual") != std::string::npos);
    CHECK(text.find("eq:energy-inequality") != std::string::npos);
    CHECK(data_rows(text) == 11);

    // Determinism: identical config, identical bytes.
    CHECK(run(base + " --T 0.5").exit_code == 0);
    CHECK(slurp(csv) == text);

    // T = 0 keeps only the initial sample.
    RunResult zero = run(base + " --T 0");
    CHECK(zero.exit_code == 0);
    CHECK(data_rows(slurp(csv)) == 1);
    CHECK(zero.output.find("rows=1") != std::string::npos);

    // Central runs report the symmetry defect.
    RunResult central = run(base + " --T 0.25 --symmetry central");
    CHECK(central.exit_code == 0);
    CHECK(central.output.find("max_central_defect=") != std::string::npos);
}

TEST_CASE("kernel-demo matches the step-probe closed form") {
    TempDir dir;
    RunResult r = run("kernel-demo --out-dir " + dir.str());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("FAIL") == std::string::npos);
    const std::string text = slurp(dir.path / "kernel_demo.csv");
    CHECK(text.find("t,I_double,I_single,chi_pairing,bound_2norm") != std::string::npos);
    CHECK(data_rows(text) == 10);
}

TEST_CASE("hardy-test stays under the log bound") {
    TempDir dir;
    RunResult r = run("hardy-test --n-fields 25 --seed 3 --out-dir " + dir.str());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("log_bound=ok") != std::string::npos);
    const std::string text = slurp(dir.path / "hardy_quotients.csv");
    CHECK(data_rows(text) == 25);
    CHECK(text.find("field,hardy_log,hardy_central") != std::string::npos);
}
