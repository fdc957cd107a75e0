#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace kqe {

// n x d table, one row per observation.
using SampleSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Invalid argument: dimension mismatch, out-of-range index, bad parameter.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The data cannot support the requested quantity (e.g. all points identical).
class DegenerateDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A configuration the estimator does not support (e.g. centered e-KQD with p != 2).
class UnsupportedConfigurationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed input file content. Carries the 1-based row and column when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t col)
        : std::runtime_error(what), row_(row), col_(col) {}
    std::size_t row() const noexcept { return row_; }
    std::size_t col() const noexcept { return col_; }

private:
    std::size_t row_;
    std::size_t col_;
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Deterministic seed substreams
// ---------------------------------------------------------------------------

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

/// Hash a root seed and a path of keys (trial, permutation, ...) into a child seed.
/// Distinct key paths give statistically independent generators.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = detail::splitmix64(seed);
    for (std::uint64_t k : keys) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(seed, keys));
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ArgumentError(msg);
}

} // namespace kqe
