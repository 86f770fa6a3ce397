#pragma once

#include <stdexcept>
#include <string>

namespace sneuron {

enum class ErrorKind {
    Input,        // malformed or out-of-range user input
    Capacity,     // sequence longer than the model supports
    Format,       // unreadable or inconsistent file
    Config,       // invalid model / decode configuration
    Construction, // infeasible synthetic model spec
    Usage,        // missing files, bad flags
    Invariant,    // internal consistency check failed
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace sneuron
