#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabml {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
    config,         // malformed configuration / contract violations at the API boundary
    schema,         // dataset does not match the declared schema
    parse,          // unparseable cell or file content
    encoding,       // unrecognized token during binary encoding
    contract,       // dimension / feature-set mismatch between fitted state and input
    data,           // dataset fails an operation precondition (empty, single class, ...)
    imputation,     // no observed values to impute from
    stratification, // class too small for the requested split / folds
    degenerate,     // numerically undefined result (coincident centroids, zero variance, ...)
    convergence,    // iterative solver failed to converge
    stage,          // pipeline-stage level failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    // Exit-code mapping used by the CLI: 2 config, 3 data, 4 numeric.
    int exit_code() const {
        switch (kind_) {
        case ErrorKind::config:
        case ErrorKind::contract:
            return 2;
        case ErrorKind::schema:
        case ErrorKind::parse:
        case ErrorKind::encoding:
        case ErrorKind::data:
        case ErrorKind::imputation:
        case ErrorKind::stratification:
        case ErrorKind::stage:
            return 3;
        case ErrorKind::degenerate:
        case ErrorKind::convergence:
            return 4;
        }
        return 1;
    }

private:
    ErrorKind kind_;
};

// ---------------------------------------------------------------------------
// Row-major numeric matrix
// ---------------------------------------------------------------------------

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Matrix select_rows(std::span<const std::size_t> idx) const;

    bool operator==(const Matrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// xoshiro256** seeded through splitmix64. All stochastic code in the library
// draws through this class (never std::uniform_*_distribution, whose output
// is implementation-defined), so seeded runs reproduce bit-for-bit anywhere.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform01();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Standard normal (Box-Muller, no cached spare so streams stay position-independent).
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.size() < 2) return;
        for (std::size_t i = v.size() - 1; i > 0; --i) {
            std::size_t j = static_cast<std::size_t>(below(i + 1));
            std::swap(v[i], v[j]);
        }
    }

    // Independent child stream; distinct stream ids give uncorrelated streams,
    // so work parallelized across streams is order-independent.
    Rng derive(std::uint64_t stream_id) const;

private:
    std::uint64_t state_[4];
    std::uint64_t seed_;
};

// Stable 64-bit mix of (seed, stream) used by Rng::derive.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// ---------------------------------------------------------------------------
// Worker pool helper
// ---------------------------------------------------------------------------

// Number of workers to use: min(requested, hardware), where requested falls
// back to the TABML_THREADS environment variable and then to the hardware
// count. requested == 0 means "no explicit request".
std::size_t worker_count(std::size_t requested = 0);

// Runs fn(i) for i in [0, n) across at most `workers` threads. Results must be
// written to per-index slots; chunk order is deterministic. Exceptions from fn
// are captured and rethrown on the calling thread.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

} // namespace tabml
