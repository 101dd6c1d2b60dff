#pragma once

#include <stdexcept>
#include <string>

namespace dcl {

// Coarse failure classes. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    numerical = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error usage_error(const std::string& message) { return {ErrorKind::usage, message}; }
inline Error data_error(const std::string& message) { return {ErrorKind::data, message}; }
inline Error numerical_error(const std::string& message) { return {ErrorKind::numerical, message}; }

// Non-fatal diagnostics (empty files, empty classes). Defaults to stderr.
using WarningSink = void (*)(const std::string& message, void* user);
void set_warning_sink(WarningSink sink, void* user);
void warn(const std::string& message);

}  // namespace dcl
