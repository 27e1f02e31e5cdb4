#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace fpg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

// Error hierarchy. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration, dimension mismatch, or invalid argument.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid argument value (NaN logits, negative ridge, K = 0, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Singular systems and other numerical breakdowns.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The exact gradient used as reference is zero, so relative metrics are undefined.
class DegenerateTargetError : public Error {
public:
    using Error::Error;
};

/// splitmix64 finalizer. Used to derive independent rng streams from (seed, counter).
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline Rng stream_rng(std::uint64_t seed, std::uint64_t counter) {
    return Rng(mix64(mix64(seed) ^ mix64(counter + 0x632be59bd9b4e019ULL)));
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
/// Each index is handled exactly once, so callers that write to slot i get
/// results independent of scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
    auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v);

}  // namespace fpg
