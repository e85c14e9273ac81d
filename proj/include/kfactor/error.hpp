#pragma once

#include <stdexcept>
#include <string>

namespace kfactor {

/// Raised when an input violates a documented precondition or a file/config
/// value is out of range. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised on filesystem failures. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace kfactor
