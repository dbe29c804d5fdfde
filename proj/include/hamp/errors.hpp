#pragma once

#include <stdexcept>
#include <string>

namespace hamp {

// Base class for all library errors so callers can catch one type at the CLI
// boundary and map it to a nonzero exit code.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& path, long line, const std::string& msg)
        : Error(path + ":" + std::to_string(line) + ": " + msg),
          line_number(line) {}
    long line_number;
};

// Structurally invalid data (index out of range, duplicate member, ...).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Operator cannot be formed (isolated node, empty hyperedge, zero degree).
class DegeneracyError : public Error {
public:
    explicit DegeneracyError(const std::string& msg) : Error(msg) {}
};

// Tensor shape mismatch; message names both shapes.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Non-finite value produced during integration; carries the step index.
class DivergenceError : public Error {
public:
    DivergenceError(long step, const std::string& msg)
        : Error("step " + std::to_string(step) + ": " + msg), step_index(step) {}
    long step_index;
};

// Bad or inconsistent run configuration (unknown key, out-of-range value).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem failure surfaced with the offending path.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace hamp
