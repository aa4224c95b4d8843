#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace retrace {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by the event/label/feature readers; carries the 1-based physical line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& reason)
        : Error(reason + " at line " + std::to_string(line)), line_(line), reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::string reason_;
};

}  // namespace retrace
