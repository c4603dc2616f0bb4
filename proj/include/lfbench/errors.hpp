#pragma once

#include <stdexcept>
#include <string>

namespace lfb {

// Malformed or inconsistent input data: bad files, out-of-range indices,
// missing calibration entries. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure: formula validity violated, fit did not converge,
// degenerate data. CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lfb
