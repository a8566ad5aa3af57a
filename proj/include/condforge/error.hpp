#pragma once

#include <stdexcept>
#include <string>

namespace condforge {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid geometric input (degenerate segment, identical lines, zero vector).
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ImageError : public Error {
 public:
  using Error::Error;
};

/// Scene-spec parse/validation failure. Carries a 1-based source position
/// (0 when unknown) and the dotted field path of the offending value.
class SpecError : public Error {
 public:
  SpecError(const std::string& message, int line, int column, std::string path)
      : Error(format(message, line, column, path)),
        line_(line),
        column_(column),
        path_(std::move(path)) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& path() const { return path_; }

 private:
  static std::string format(const std::string& message, int line, int column,
                            const std::string& path) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ", column " + std::to_string(column) + ": ";
    if (!path.empty()) out += path + ": ";
    return out + message;
  }

  int line_;
  int column_;
  std::string path_;
};

class PipelineError : public Error {
 public:
  using Error::Error;
};

class FlowError : public Error {
 public:
  using Error::Error;
};

}  // namespace condforge
