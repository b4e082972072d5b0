#pragma once

#include <stdexcept>
#include <string>

namespace arw {

/// Invalid user-supplied parameter (negative rate, malformed layout, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Attempt to topple a stable site.
class IllegalToppling : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A procedure invariant was observed broken; `what()` carries a state dump.
class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Toppling budget exhausted before the run completed.
class BudgetExceeded : public std::runtime_error {
public:
    explicit BudgetExceeded(const std::string& msg, unsigned long long topplings)
        : std::runtime_error(msg), topplings_(topplings)
    {}

    unsigned long long topplings() const noexcept { return topplings_; }

private:
    unsigned long long topplings_;
};

}  // namespace arw
