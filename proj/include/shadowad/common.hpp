#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace shadowad {

// Failure taxonomy; the CLI maps each kind onto a distinct exit code.
enum class ErrorKind {
    validation,  // bad arguments, malformed config, impossible geometry
    io,          // missing/corrupt files, unwritable outputs
    numeric,     // non-finite values where finiteness is required
    model,       // checkpoint/architecture mismatches
};

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace shadowad
