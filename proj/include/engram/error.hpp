#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace engram {

enum class ErrorKind {
    invalid_argument,
    not_found,
    conflict,
    configuration,
    parse,
    format,
    judge_protocol,
    policy,
    transport,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace engram
