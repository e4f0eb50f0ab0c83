#pragma once

#include <stdexcept>
#include <string>

namespace prt {

// Malformed or inconsistent external data (archives, parsers, configs).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Training or numeric procedure produced non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prt
