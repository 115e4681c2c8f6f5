#pragma once

#include <stdexcept>
#include <string>

namespace spoofmeter {

/// Bad input: malformed files, invalid configuration, undefined metrics.
/// The CLI maps this to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A violated internal invariant (non-finite loss, corrupted state).
/// The CLI maps this to exit code 2.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace spoofmeter
