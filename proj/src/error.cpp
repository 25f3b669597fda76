#include "aled/error.hpp"

namespace aled {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kData: return "data error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kLabel: return "label error";
    case ErrorKind::kClass: return "class error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kUndefined: return "undefined quantity";
    case ErrorKind::kRank: return "rank error";
    case ErrorKind::kNotPositiveDefinite: return "not positive definite";
    case ErrorKind::kDegenerate: return "degenerate input";
    case ErrorKind::kDetection: return "detection error";
    case ErrorKind::kSerialization: return "serialization error";
  }
  return "unknown error";
}

bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kRank:
    case ErrorKind::kNotPositiveDefinite:
    case ErrorKind::kDegenerate:
    case ErrorKind::kDetection:
    case ErrorKind::kSerialization:
      return true;
    default:
      return false;
  }
}

}  // namespace aled
