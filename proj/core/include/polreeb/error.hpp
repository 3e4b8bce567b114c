#pragma once

#include <stdexcept>
#include <string>

namespace polreeb {

// Every recoverable failure in the library surfaces as this type (or a
// subclass); messages are short lowercase phrases so callers can match on them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the binary graph reader for version and integrity failures.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace polreeb
