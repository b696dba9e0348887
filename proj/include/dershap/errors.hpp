#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace dershap {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Expression text could not be parsed. `offset` is the 1-based byte
/// offset of the offending token (one past the end for unexpected EOF).
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t offset)
        : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Evaluation left the mathematical domain of an expression node
/// (log of a nonpositive value, division by zero, ...). `offset` locates
/// the offending operator in the expression source.
class DomainError : public Error {
public:
    DomainError(const std::string& msg, std::size_t offset)
        : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Invalid configuration or violated precondition (bad spec, out-of-range
/// method parameter, refused input class). CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A model evaluation failed: non-finite output, subprocess failure,
/// malformed protocol response. CLI exit code 3. `row` is the index of the
/// offending evaluation point when known, -1 otherwise.
class EvalError : public Error {
public:
    explicit EvalError(const std::string& msg, std::int64_t row = -1)
        : Error(msg), row_(row) {}

    std::int64_t row() const noexcept { return row_; }

private:
    std::int64_t row_;
};

/// A guarded resource limit was exceeded (quadrature node budget,
/// subset-enumeration dimension cap). CLI exit code 4.
class BudgetError : public Error {
public:
    using Error::Error;
};

}  // namespace dershap
