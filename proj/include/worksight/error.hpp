#pragma once

#include <stdexcept>
#include <string>

namespace worksight {

/// Input violates a documented format or invariant (bad manifest, malformed
/// table, out-of-range argument). CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is well-formed but the data cannot be processed (missing file,
/// empty stream, non-finite loss). CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace worksight
