#include "semdist/error.hpp"

namespace semdist {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::file_not_found: return "file_not_found";
    case ErrorKind::io_error: return "io_error";
    case ErrorKind::bad_magic: return "bad_magic";
    case ErrorKind::unsupported_format: return "unsupported_format";
    case ErrorKind::truncated: return "truncated";
    case ErrorKind::invalid_data: return "invalid_data";
    case ErrorKind::shape_mismatch: return "shape_mismatch";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::parse_error: return "parse_error";
    case ErrorKind::invalid_argument: return "invalid_argument";
  }
  return "unknown";
}

}  // namespace semdist
