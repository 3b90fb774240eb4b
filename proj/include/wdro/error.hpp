#pragma once

#include <stdexcept>
#include <string>

namespace wdro {

/// Input expected to be symmetric positive (semi-)definite is not.
class NotSpdError : public std::runtime_error {
 public:
  explicit NotSpdError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative routine exhausted its iteration budget or lost its bracket.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace wdro
