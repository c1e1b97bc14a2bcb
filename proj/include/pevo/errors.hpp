#ifndef PEVO_ERRORS_HPP
#define PEVO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pevo {

// Violated precondition or broken internal contract (bad grid, unsupported
// parameter combination, coverage/resolution failure).  The message names the
// violated bound.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Runtime numerical failure: NaN/overflow during stepping, noise floor
// exceeded, truncation certificate failure.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Rejected run configuration (harness level).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pevo

#endif
