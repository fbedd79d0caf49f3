#include "rom/error.hpp"

namespace rom {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid argument";
        case ErrorKind::Shape: return "shape error";
        case ErrorKind::Degenerate: return "degenerate variable";
        case ErrorKind::Numeric: return "numeric failure";
        case ErrorKind::Format: return "format error";
        case ErrorKind::Corrupt: return "corrupt file";
        case ErrorKind::Io: return "i/o error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Mismatch: return "mismatch";
    }
    return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void rethrow_with_prefix(const Error& e, const std::string& prefix) {
    const std::string m = prefix + ": " + e.what();
    switch (e.kind()) {
        case ErrorKind::InvalidArgument: throw InvalidArgument(m);
        case ErrorKind::Shape: throw ShapeError(m);
        case ErrorKind::Degenerate:
            if (const auto* d = dynamic_cast<const DegenerateVariableError*>(&e)) throw DegenerateVariableError(d->variable(), m);
            break;
        case ErrorKind::Numeric: throw NumericError(m);
        case ErrorKind::Format: throw FormatError(m);
        case ErrorKind::Corrupt: throw CorruptError(m);
        case ErrorKind::Io: throw IoError(m);
        case ErrorKind::Config: throw ConfigError(m);
        case ErrorKind::Mismatch: throw MismatchError(m);
    }
    throw Error(e.kind(), m);
}

}  // namespace rom
