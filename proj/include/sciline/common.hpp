#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sciline {

enum class ErrorKind {
    invalid_argument,
    io,
    schema,
    duplicate_key,
    unknown_key,
    data,
    collinear,
    non_convergence,
    config,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

// Shortest representation that round-trips; "NA" for missing or non-finite.
std::string format_double(double value);
std::string format_double(const std::optional<double>& value);

// Fixed number of decimals, used by human-facing tables.
std::string format_fixed(double value, int decimals);

// Quotes a CSV field only when it contains a separator, quote or newline.
std::string csv_escape(std::string_view field);

// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> csv_split(std::string_view line);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void comment(std::string_view text);
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

// ---------------------------------------------------------------------------
// Dates (days since 1970-01-01)
// ---------------------------------------------------------------------------

std::optional<int> parse_iso_date(std::string_view text);
std::string format_iso_date(int days);

// ---------------------------------------------------------------------------
// Hashing and deterministic random numbers
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::filesystem::path& path);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// The std distributions are implementation-defined, so every sampler used
// for generated data lives here and only consumes raw engine output.
using Rng = std::mt19937_64;

double uniform01(Rng& rng);
std::size_t uniform_index(Rng& rng, std::size_t n);
double standard_normal(Rng& rng);
int poisson_draw(Rng& rng, double mean);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

// Worker cap shared by all stages. 0 means hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

// Runs body(i) for i in [0, n). Each index runs exactly once; results that
// are written to per-index slots are therefore independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Small numeric helpers
// ---------------------------------------------------------------------------

double mean(const std::vector<double>& values);
double population_stddev(const std::vector<double>& values);
double median(std::vector<double> values);

}  // namespace sciline
