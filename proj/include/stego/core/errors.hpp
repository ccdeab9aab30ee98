#pragma once

#include <stdexcept>
#include <string>

namespace stego {

enum class ErrorKind {
    InvalidArgument,
    Parse,
    Io,
    Config,
    Numeric,
    Usage,
};

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::Io: return "io-error";
        case ErrorKind::Config: return "config-error";
        case ErrorKind::Numeric: return "numeric-error";
        case ErrorKind::Usage: return "usage-error";
    }
    return "error";
}

}  // namespace stego
