#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace firebench
{

enum class ErrorKind
{
    Parse,        ///< malformed line or field
    Range,        ///< value outside its allowed interval
    Class,        ///< class id not in the class table
    Duplicate,    ///< repeated image id or class id
    Io,           ///< unreadable or unwritable file
    Ordering,     ///< timestamps not strictly increasing
    InsufficientData,
    Precondition, ///< caller violated an operation contract
    NoPositives,  ///< class has no ground truth
    MissingField,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure in the toolkit is reported through this exception. `file` and
/// `line` are filled in when the error can be traced to an input location;
/// `line` is 1-based and 0 when not applicable.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& message, std::string file = {}, std::size_t line = 0);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    const std::string& detail() const noexcept { return detail_; }

    /// Copy of this error with a file name attached (keeps an existing one).
    Error with_file(const std::string& file) const;

private:
    ErrorKind kind_;
    std::string detail_;
    std::string file_;
    std::size_t line_;
};

} // namespace firebench
