#pragma once

#include <stdexcept>
#include <string>

namespace boxseg {

// Bad input files, malformed manifests, missing paths. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite numbers are required. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace boxseg
