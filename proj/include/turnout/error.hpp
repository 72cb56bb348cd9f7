#pragma once

#include <stdexcept>
#include <string>

namespace turnout {

/// Broad failure categories. The CLI maps each one onto an exit code.
enum class ErrorKind {
    InvalidArgument,  // bad configuration or option values
    Dimension,        // shape mismatch between curves, windows and models
    Numeric,          // NaN/Inf in inputs or during training
    Io,               // file could not be opened, read or written
    Schema,           // malformed document or record, version mismatch
    InsufficientData  // not enough history for the requested operation
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace turnout
