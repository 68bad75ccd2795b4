#pragma once

#include <stdexcept>
#include <string>

namespace polycd {

/// No feasible point exists (or none could be certified).
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative routine hit its iteration cap before reaching its exit test.
struct IterationCapError : std::runtime_error {
  explicit IterationCapError(const std::string& what) : std::runtime_error(what) {}
};

/// An operation needs data (Hessian, strong-convexity matrix, ...) the model does not carry.
struct MissingDataError : std::runtime_error {
  explicit MissingDataError(const std::string& what) : std::runtime_error(what) {}
};

/// Armijo backtracking exceeded its cap; the Lipschitz data is likely mis-specified.
struct BacktrackCapError : std::runtime_error {
  explicit BacktrackCapError(const std::string& what) : std::runtime_error(what) {}
};

/// A fit window is too short or the data sits at the numerical noise floor.
struct WindowError : std::runtime_error {
  explicit WindowError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace polycd
