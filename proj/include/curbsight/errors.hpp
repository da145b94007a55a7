#pragma once

#include <stdexcept>
#include <string>

namespace curbsight {

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct GeometryError : std::domain_error {
    using std::domain_error::domain_error;
};

struct InsufficientObservations : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfCoverage : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Parse failure with file/line/field context baked into the message.
struct ParseError : std::runtime_error {
    ParseError(const std::string& file, std::size_t line, const std::string& field,
               const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": field '" + field +
                             "': " + what),
          file_name(file), line_number(line), field_name(field) {}

    std::string file_name;
    std::size_t line_number;
    std::string field_name;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace curbsight
