#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stackstab {

/// Raised when a linear system that must be solved exactly is (numerically) singular.
class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when training fails inside a larger loop (ensemble member, LOO fold,
/// Monte-Carlo trial). The message is prefixed with the failing index.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what_loop, std::size_t index, const std::string& cause)
        : std::runtime_error(what_loop + " " + std::to_string(index) + ": " + cause),
          index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace stackstab
