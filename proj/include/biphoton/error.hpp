#pragma once

#include <stdexcept>
#include <string>

namespace biphoton {

/// Input rejected by a precondition or invariant check. Maps to CLI exit code 2.
class InvalidInput : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// Failure while executing an otherwise valid request. Maps to CLI exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
    if (!condition) throw InvalidInput(message);
}

}  // namespace biphoton
