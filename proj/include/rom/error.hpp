#pragma once

#include <stdexcept>
#include <string>

namespace rom {

enum class ErrorKind {
    InvalidArgument,
    Shape,
    Degenerate,
    Numeric,
    Format,
    Corrupt,
    Io,
    Config,
    Mismatch,
};

const char* to_string(ErrorKind kind);

/// Base exception for the toolkit. The kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& m) : Error(ErrorKind::InvalidArgument, m) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& m) : Error(ErrorKind::Shape, m) {}
};

/// A variable with (numerically) zero fluctuation cannot be auto-scaled.
class DegenerateVariableError : public Error {
public:
    DegenerateVariableError(const std::string& variable, const std::string& m)
        : Error(ErrorKind::Degenerate, m), variable_(variable) {}
    const std::string& variable() const noexcept { return variable_; }

private:
    std::string variable_;
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& m) : Error(ErrorKind::Numeric, m) {}
};

class FormatError : public Error {
public:
    explicit FormatError(const std::string& m) : Error(ErrorKind::Format, m) {}
};

class CorruptError : public Error {
public:
    explicit CorruptError(const std::string& m) : Error(ErrorKind::Corrupt, m) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& m) : Error(ErrorKind::Io, m) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& m) : Error(ErrorKind::Config, m) {}
};

class MismatchError : public Error {
public:
    explicit MismatchError(const std::string& m) : Error(ErrorKind::Mismatch, m) {}
};

/// Rethrows `e` as the same concrete type with `prefix: ` prepended to the message.
[[noreturn]] void rethrow_with_prefix(const Error& e, const std::string& prefix);

}  // namespace rom
