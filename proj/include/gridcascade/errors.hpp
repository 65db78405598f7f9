#pragma once

#include <stdexcept>
#include <string>

namespace gridcascade {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case text. Carries the 1-based position of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    [[nodiscard]] std::size_t line() const { return line_; }
    [[nodiscard]] std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Structural problem with the network (disconnected, unknown bus, ...).
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Injections that do not sum to zero on an island.
class ImbalanceError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver.
class SolverError : public Error {
public:
    using Error::Error;
};

}  // namespace gridcascade
