#pragma once

#include <stdexcept>
#include <string>

namespace synthview {

/// Malformed or inconsistent input data (bad file contents, invalid parameters).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file or directory could not be opened, read, or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace synthview
