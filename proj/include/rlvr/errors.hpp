#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rlvr {

// Invalid configuration values. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: bad shapes, unknown ids, out-of-range tokens.
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Non-finite loss or gradient during training. Carries a diagnostic dump of
// the offending batch; the CLI persists it and exits with code 3.
struct NumericalError : std::runtime_error {
    NumericalError(const std::string& msg, std::string dump)
        : std::runtime_error(msg), diagnostics(std::move(dump)) {}

    std::string diagnostics;
};

}  // namespace rlvr
