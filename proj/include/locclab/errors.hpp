// errors.hpp - exception types shared by all locclab modules

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace locclab {

// Base of every error raised by the library. kind() is the stable name that the
// CLI reports in its structured error output.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define LOCCLAB_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(#Name, message) {}   \
    }

LOCCLAB_DEFINE_ERROR(LayoutError);
LOCCLAB_DEFINE_ERROR(NumericError);
LOCCLAB_DEFINE_ERROR(InvariantError);
LOCCLAB_DEFINE_ERROR(SpecError);
LOCCLAB_DEFINE_ERROR(ChannelError);
LOCCLAB_DEFINE_ERROR(ConfigError);
LOCCLAB_DEFINE_ERROR(ResourceError);
LOCCLAB_DEFINE_ERROR(ModeError);
LOCCLAB_DEFINE_ERROR(CatalystViolation);
LOCCLAB_DEFINE_ERROR(DomainError);

#undef LOCCLAB_DEFINE_ERROR

// Interior-point solver gave up; carries the best certified bracket it reached.
class SolverError : public Error {
public:
    SolverError(const std::string& message, double best_lower, double best_upper)
        : Error("SolverError", message), lower_(best_lower), upper_(best_upper) {}

    double best_lower() const noexcept { return lower_; }
    double best_upper() const noexcept { return upper_; }

private:
    double lower_;
    double upper_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t byte_offset)
        : Error("ParseError", message + " (at byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

} // namespace locclab
