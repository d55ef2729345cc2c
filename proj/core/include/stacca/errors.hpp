#pragma once

#include <stdexcept>
#include <string>

namespace stacca {

// Error taxonomy maps onto CLI exit codes: config 2, artifact 3, numeric 4.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct artifact_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stacca
