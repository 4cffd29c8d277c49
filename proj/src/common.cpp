#include "exflow/common.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace exflow {

namespace {
// Chunk count is fixed so the split (and hence the rounding pattern) does
// not depend on the number of workers.
constexpr std::size_t kChunks = 256;
}  // namespace

double reduce_indexed(std::size_t n, const std::function<double(std::size_t)>& term) {
    if (n == 0) return 0.0;
    if (n <= 2 * kChunks) {
        KahanSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(term(i));
        return acc.value();
    }
    std::array<double, kChunks> partial{};
    const std::size_t chunk = (n + kChunks - 1) / kChunks;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::size_t c = 0; c < kChunks; ++c) {
        const std::size_t lo = c * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        KahanSum acc;
        for (std::size_t i = lo; i < hi; ++i) acc.add(term(i));
        partial[c] = acc.value();
    }
    KahanSum total;
    for (double p : partial) total.add(p);
    return total.value();
}

double reduce_serial(std::size_t n, const std::function<double(std::size_t)>& term) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += term(i);
    return s;
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 64> buf;
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

double parse_double(const std::string& s) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    if (b < e) {
        // from_chars does not accept "inf"/"nan" spellings everywhere.
        std::string t(b, e);
        if (t == "inf") return HUGE_VAL;
        if (t == "-inf") return -HUGE_VAL;
        if (t == "nan") return std::nan("");
    }
    double v = 0;
    auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc()) throw std::invalid_argument("parse_double: bad token '" + s + "'");
    return v;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("atomic_write_file: cannot open " + tmp.string());
        out.write(contents.data(), std::streamsize(contents.size()));
        if (!out) throw std::runtime_error("atomic_write_file: short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw std::runtime_error("atomic_write_file: rename failed: " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void CsvTable::add_row(const std::vector<double>& row) {
    if (row.size() != columns_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
    std::vector<std::string> cells;
    cells.reserve(row.size());
    for (double x : row) cells.push_back(format_double(x));
    rows_.push_back(std::move(cells));
}

void CsvTable::add_row_raw(const std::vector<std::string>& row) {
    if (row.size() != columns_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
    rows_.push_back(row);
}

std::string CsvTable::str() const {
    std::ostringstream out;
    for (const auto& c : comments_) out << "# " << c << "\n";
    for (std::size_t j = 0; j < columns_.size(); ++j) out << (j ? "," : "") << columns_[j];
    out << "\n";
    for (const auto& r : rows_) {
        for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
        out << "\n";
    }
    return out.str();
}

}  // namespace exflow
