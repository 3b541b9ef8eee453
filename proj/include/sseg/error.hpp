#pragma once

#include <stdexcept>
#include <string>

namespace sseg {

/// Base error carrying a machine-parsable kind tag. The CLI prints
/// failures as a single "kind: message" line and exits nonzero.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const { return kind_; }

    std::string line() const { return kind_ + ": " + what(); }

private:
    std::string kind_;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error("shape_error", m) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& m) : Error("format_error", m) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io_error", m) {}
};

struct CapacityError : Error {
    explicit CapacityError(const std::string& m) : Error("capacity_error", m) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& m) : Error("numeric_error", m) {}
};

struct SpecError : Error {
    explicit SpecError(const std::string& m) : Error("spec_error", m) {}
};

}  // namespace sseg
