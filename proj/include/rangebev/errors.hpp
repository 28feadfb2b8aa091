#pragma once

#include <stdexcept>
#include <string>

namespace rangebev {

/// Bad configuration (shapes, specs, config files). CLI maps this to exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad input data (files, labels, values). CLI maps this to exit code 3.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed file content; the message names the offending location.
struct format_error : data_error {
  using data_error::data_error;
};

/// API misuse by a caller (missing cache, mismatched list lengths).
struct usage_error : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace rangebev
