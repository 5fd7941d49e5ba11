#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pmlkit {

enum class ErrorKind {
  Domain,
  DimensionMismatch,
  NotSymmetric,
  NotPositiveDefinite,
  NotPsd,
  ZeroMatrix,
  RankMismatch,
  NecessaryConditionViolated,
  NoRoot,
  NonConvergence,
  NotSchurStable,
  Schema,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so front ends can map
/// it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace pmlkit
