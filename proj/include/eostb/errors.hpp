#pragma once

#include <stdexcept>
#include <string>

namespace eostb {

// Base for every error the library raises. error_class() is the stable,
// machine-readable tag the CLI prints on stderr.
class Error : public std::runtime_error {
 public:
  Error(std::string cls, const std::string& what)
      : std::runtime_error(what), cls_(std::move(cls)) {}
  const std::string& error_class() const noexcept { return cls_; }

 private:
  std::string cls_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error("config_error", w) {}
};
struct LengthError : Error {
  explicit LengthError(const std::string& w) : Error("length_error", w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error("numeric_error", w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error("io_error", w) {}
};
struct AlignmentError : Error {
  explicit AlignmentError(const std::string& w) : Error("alignment_error", w) {}
};
struct GenerationError : Error {
  explicit GenerationError(const std::string& w) : Error("generation_error", w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error("format_error", w) {}
};

}  // namespace eostb
