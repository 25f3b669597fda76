#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aled {

enum class ErrorKind {
  kFormat,         // malformed file header or document
  kData,           // non-finite or missing values
  kShape,          // dimension mismatch or unsupported rank
  kLabel,          // label outside {0,1}
  kClass,          // a class is absent or too small
  kIo,             // file cannot be opened or written
  kUndefined,      // quantity undefined for the input (e.g. AUPRC without positives)
  kRank,           // too few samples or zero-variance data
  kNotPositiveDefinite,
  kDegenerate,     // degenerate subset, direction, or noise request
  kDetection,      // every ensemble member failed
  kSerialization,  // refusing to serialize non-finite values
};

std::string_view to_string(ErrorKind kind);

/// True for failures that originate in the numerics rather than the inputs.
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace aled
