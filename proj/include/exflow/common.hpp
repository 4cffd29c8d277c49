#pragma once
// Shared numerics and I/O plumbing: compensated reductions that are
// bit-identical regardless of worker count, shortest round-trip float
// formatting, atomic file writes, and a small deterministic RNG layer.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace exflow {

// Neumaier-compensated accumulator. add() never loses more than one ulp of
// the running sum; value() folds the compensation back in.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;
    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

// Sum of term(i) for i in [0, n). Work is split into a fixed number of
// chunks (independent of thread count), each chunk is summed with
// compensation, and chunk results are combined in index order, so the
// result is the same bit pattern no matter how many OpenMP workers run.
double reduce_indexed(std::size_t n, const std::function<double(std::size_t)>& term);

// Plain left-to-right accumulation. Reference implementation for tests and
// benchmarks; production code uses reduce_indexed.
double reduce_serial(std::size_t n, const std::function<double(std::size_t)>& term);

// Shortest decimal string that round-trips to the same double (to_chars).
std::string format_double(double x);

// Parse with full precision; throws std::invalid_argument on garbage.
double parse_double(const std::string& s);

// Write contents to path via a temp file + rename so readers never observe
// a partially written file. Throws std::runtime_error on I/O failure.
void atomic_write_file(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

// Columnar CSV accumulator. Header comment lines (starting with '#') carry
// provenance tokens required by the file contract; the column row follows.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void add_comment(const std::string& line) { comments_.push_back(line); }
    void add_row(const std::vector<double>& row);
    void add_row_raw(const std::vector<std::string>& row);
    std::string str() const;
    void write(const std::string& path) const { atomic_write_file(path, str()); }
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> columns_;
    std::vector<std::string> comments_;
    std::vector<std::vector<std::string>> rows_;
};

// SplitMix64: tiny, seedable, and stable across platforms. Used both as a
// stream of uniforms and to derive independent per-index substreams so that
// enlarging a trial budget never perturbs earlier trials.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next_u64() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
    // Uniform in [0, 1).
    double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }
    // Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * next_double(); }
    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }
};

// Substream for trial #index under a master seed. Prefix property: the
// substream for a given (seed, index) pair does not depend on how many
// other indices are drawn.
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 g(seed ^ (0x9e3779b97f4a7c15ull * (index + 1)));
    g.next_u64();
    return g;
}

}  // namespace exflow
