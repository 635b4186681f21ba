#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semdist {

// Machine-readable failure categories. The CLI reports these verbatim in its
// error JSON, so the spellings are part of the external interface.
enum class ErrorKind {
  file_not_found,
  io_error,
  bad_magic,
  unsupported_format,
  truncated,
  invalid_data,
  shape_mismatch,
  numerical,
  parse_error,
  invalid_argument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace semdist
