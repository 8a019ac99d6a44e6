#pragma once

#include <stdexcept>
#include <string>

namespace pitc {

// Library-level failure with a stable machine-readable code, e.g.
// "UnknownAtom", "UnboundIdentifier", "Truncated". The CLI maps codes to
// exit statuses.
class PitcError : public std::runtime_error {
public:
    PitcError(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message) {
    throw PitcError(code, message);
}

}  // namespace pitc
