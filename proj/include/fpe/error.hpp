#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fpe {

enum class ErrorKind {
  Io,
  Format,
  Contract,
  DegenerateHistogram,
  FovEstimation,
  EmptyMask,
  DegenerateLabels,
  ResamplingFailure,
  Reconciliation,
};

std::string_view to_string(ErrorKind kind);

// Every recoverable failure in the library is an fpe::Error carrying a kind,
// so batch drivers can record it per record without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when manifests and prediction files disagree. Carries every
// offending id, not just the first.
class ReconciliationError : public Error {
 public:
  ReconciliationError(const std::string& what, std::vector<std::string> ids)
      : Error(ErrorKind::Reconciliation, what), ids_(std::move(ids)) {}

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::Contract, what);
}

}  // namespace fpe
