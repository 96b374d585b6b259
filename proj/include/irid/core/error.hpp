#pragma once

#include <stdexcept>
#include <string>

namespace irid {

// All recoverable failures surface as irid::Error; the CLI maps them to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void raise(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) raise(msg);
}

} // namespace irid
