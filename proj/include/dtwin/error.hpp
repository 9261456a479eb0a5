#pragma once

#include <stdexcept>
#include <string>

namespace dtwin {

/// Base for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input parsed but violates a schema or a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Syntax error in a text format (OBJ, CSV, process documents, expressions).
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, int line = 0, int column = 0)
        : ValidationError(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                                         std::to_string(column) + ")"
                                   : what),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Numeric failure: degenerate geometry, zero denominators, non-finite results.
class MathError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

}  // namespace dtwin
