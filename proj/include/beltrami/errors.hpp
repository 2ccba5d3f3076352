#pragma once

#include <stdexcept>
#include <string>

namespace beltrami {

/// Input violates an operation's precondition (bad grid, incompatible charts,
/// malformed scenario). Maps to CLI exit code 1.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (stagnation, CG breakdown, degenerate chart,
/// non-finite growth). Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace beltrami
