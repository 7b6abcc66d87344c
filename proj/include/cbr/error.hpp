#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbr {

/// Error classes raised by the engine. Each maps to one API error code
/// and one CLI exit status.
enum class ErrorKind {
    Parse,         // malformed document or request
    Validation,    // well-formed but violates a schema or precondition
    NotFound,
    IllegalState,  // session operation not legal in the current state
    Io
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error parse_error(const std::string& msg) { return {ErrorKind::Parse, msg}; }
inline Error validation_error(const std::string& msg) { return {ErrorKind::Validation, msg}; }
inline Error not_found(const std::string& msg) { return {ErrorKind::NotFound, msg}; }
inline Error illegal_state(const std::string& msg) { return {ErrorKind::IllegalState, msg}; }
inline Error io_error(const std::string& msg) { return {ErrorKind::Io, msg}; }

}  // namespace cbr
