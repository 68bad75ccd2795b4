#pragma once

#include <optional>
#include <string>

#include "polycd/objectives.hpp"
#include "polycd/polytope.hpp"
#include "polycd/solvers.hpp"

namespace polycd {

struct ObjectiveSpec {
  enum class Kind { quadratic, registry };
  Kind kind = Kind::quadratic;
  Matrix Q;
  Vector c;
  std::string registry_name;
};

/// On-disk problem instance. Serialized with canonical key order and
/// shortest round-trip float formatting, so serialize(parse(s)) == s for
/// canonically written files.
struct Problem {
  BlockStructure blocks;
  ObjectiveSpec objective;
  Matrix A;  // p x m, possibly empty
  Vector b;
  Vector start;
  std::optional<Vector> solution;
  std::string notes;

  int m() const { return blocks.total(); }
  ObjectiveModel make_objective() const;
  Polyhedron make_polyhedron() const;
};

std::string problem_to_json(const Problem& p);
Problem problem_from_json(const std::string& text);
Problem load_problem(const std::string& path);
void save_problem(const std::string& path, const Problem& p);

/// Trace CSV: k, f, residual, alpha, block, active_set, t_wall_ms,
/// lambda_0..lambda_{m-1}. Active sets are semicolon-joined 0-based indices;
/// floats use shortest round-trip formatting.
void write_trace_csv(const std::string& path, const IterateTrace& trace, int m);
std::string trace_to_csv(const IterateTrace& trace, int m);

}  // namespace polycd
