#pragma once

#include <stdexcept>
#include <string>

namespace stochmanifold {

// Bad arguments, grid mismatches, violated preconditions.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A numerical procedure did not reach its target (fixed point, shooting,
// backward solve). Carries the last diagnostic value it saw.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double diagnostic)
        : std::runtime_error(what), diagnostic_(diagnostic) {}

    double diagnostic() const noexcept { return diagnostic_; }

private:
    double diagnostic_;
};

} // namespace stochmanifold
