#pragma once

#include <stdexcept>

namespace crl {

// Problems in user-supplied inputs (missing files, schema or range
// violations). Mapped to CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values encountered while training or scoring. Mapped to CLI
// exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crl
