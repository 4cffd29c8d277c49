#include "exflow/config.hpp"

#include <cstddef>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "exflow/common.hpp"

namespace exflow {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "': cannot parse '" + value +
                                    "' as a number");
    }
    if (used != value.size())
        throw std::invalid_argument("config: key '" + key + "': trailing characters in '" + value +
                                    "'");
    return x;
}

long long parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long n = 0;
    try {
        n = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "': cannot parse '" + value +
                                    "' as an integer");
    }
    if (used != value.size())
        throw std::invalid_argument("config: key '" + key + "': trailing characters in '" + value +
                                    "'");
    return n;
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        if (comma == std::string::npos) comma = value.size();
        std::string item = trim(value.substr(pos, comma - pos));
        if (!item.empty()) out.push_back(parse_double(key, item));
        pos = comma + 1;
    }
    return out;
}

}  // namespace

SimulateOptions ExperimentConfig::simulate_options() const {
    SimulateOptions opt;
    opt.r_max = r_max;
    opt.n_modes_theta = n_modes_theta;
    opt.n_modes_radial = n_modes_radial;
    opt.dt = dt;
    opt.scheme = scheme;
    opt.central = central;
    opt.seed = seed;
    return opt;
}

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "phi") {
        cfg.phi = parse_double(key, value);
    } else if (key == "mu") {
        cfg.mu = parse_double(key, value);
    } else if (key == "amp") {
        cfg.amp = parse_double(key, value);
    } else if (key == "r_max") {
        cfg.r_max = parse_double(key, value);
    } else if (key == "n_modes_theta") {
        cfg.n_modes_theta = int(parse_int(key, value));
    } else if (key == "n_modes_radial") {
        cfg.n_modes_radial = int(parse_int(key, value));
    } else if (key == "dt") {
        cfg.dt = parse_double(key, value);
    } else if (key == "T") {
        cfg.T = parse_double(key, value);
    } else if (key == "scheme") {
        try {
            cfg.scheme = scheme_from_name(value);
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key 'scheme': unknown scheme '" + value + "'");
        }
    } else if (key == "symmetry") {
        if (value == "none")
            cfg.central = false;
        else if (value == "central")
            cfg.central = true;
        else
            throw std::invalid_argument("config: key 'symmetry': expected none or central, got '" +
                                        value + "'");
    } else if (key == "seed") {
        long long n = parse_int(key, value);
        if (n < 0) throw std::invalid_argument("config: key 'seed': must be nonnegative");
        cfg.seed = std::uint64_t(n);
    } else if (key == "alphas") {
        cfg.alphas = parse_list(key, value);
    } else if (key == "tol") {
        cfg.tol = parse_double(key, value);
    } else if (key == "n_fields") {
        cfg.n_fields = int(parse_int(key, value));
    } else if (key == "out_dir") {
        cfg.out_dir = value;
    } else {
        throw std::invalid_argument("config: unknown key '" + key + "'");
    }
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        ": expected key=value, got '" + line + "'");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    apply_config_text(cfg, buf.str());
}

std::string config_to_text(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "phi=" << format_double(cfg.phi) << "\n";
    out << "mu=" << format_double(cfg.mu) << "\n";
    out << "amp=" << format_double(cfg.amp) << "\n";
    out << "r_max=" << format_double(cfg.r_max) << "\n";
    out << "n_modes_theta=" << cfg.n_modes_theta << "\n";
    out << "n_modes_radial=" << cfg.n_modes_radial << "\n";
    out << "dt=" << format_double(cfg.dt) << "\n";
    out << "T=" << format_double(cfg.T) << "\n";
    out << "scheme=" << scheme_name(cfg.scheme) << "\n";
    out << "symmetry=" << (cfg.central ? "central" : "none") << "\n";
    out << "seed=" << cfg.seed << "\n";
    std::string alphas;
    for (double a : cfg.alphas) {
        if (!alphas.empty()) alphas += ",";
        alphas += format_double(a);
    }
    out << "alphas=" << alphas << "\n";
    out << "tol=" << format_double(cfg.tol) << "\n";
    out << "n_fields=" << cfg.n_fields << "\n";
    out << "out_dir=" << cfg.out_dir << "\n";
    return out.str();
}

}  // namespace exflow
