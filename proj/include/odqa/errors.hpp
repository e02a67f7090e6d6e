#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace odqa {

/// Base for runtime failures raised by the engine. Precondition violations
/// use std::invalid_argument instead.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An embedding or span-scoring provider failed; `item()` names the chunk or
/// request that was being processed when it did.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, std::string item = {})
      : Error(item.empty() ? what : what + " (item: " + item + ")"), item_(std::move(item)) {}

  const std::string& item() const noexcept { return item_; }

 private:
  std::string item_;
};

/// Query-time provider does not match the one the index was built with.
class FingerprintMismatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace odqa
