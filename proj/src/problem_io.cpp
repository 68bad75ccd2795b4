#include "polycd/problem_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polycd {

using json = nlohmann::ordered_json;

namespace {

json matrix_to_json(const Matrix& M) {
  json rows = json::array();
  for (int r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Matrix matrix_from_json(const json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  Matrix M(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j.at(r).size()) != cols)
      throw std::invalid_argument("ragged matrix in problem file");
    for (int c = 0; c < cols; ++c) M(r, c) = j.at(r).at(c).get<double>();
  }
  return M;
}

Vector vector_from_json(const json& j) {
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace

ObjectiveModel Problem::make_objective() const {
  if (objective.kind == ObjectiveSpec::Kind::quadratic) {
    QuadraticObjective q{objective.Q, objective.c};
    return q.model(blocks);
  }
  return registry_objective(objective.registry_name, blocks);
}

Polyhedron Problem::make_polyhedron() const {
  if (A.rows() == 0) return Polyhedron::unconstrained(blocks);
  return Polyhedron(A, b, blocks);
}

std::string problem_to_json(const Problem& p) {
  json j;
  j["m"] = p.m();
  j["blocks"] = p.blocks.dims();
  json obj;
  if (p.objective.kind == ObjectiveSpec::Kind::quadratic) {
    obj["type"] = "quadratic";
    obj["Q"] = matrix_to_json(p.objective.Q);
    obj["c"] = vector_to_json(p.objective.c);
  } else {
    obj["type"] = "registry:" + p.objective.registry_name;
  }
  j["objective"] = std::move(obj);
  json cons;
  cons["A"] = matrix_to_json(p.A);
  cons["b"] = vector_to_json(p.b);
  j["constraints"] = std::move(cons);
  j["start"] = vector_to_json(p.start);
  if (p.solution) j["solution"] = vector_to_json(*p.solution);
  j["notes"] = p.notes;
  return j.dump(2) + "\n";
}

Problem problem_from_json(const std::string& text) {
  const json j = json::parse(text);
  Problem p;
  p.blocks = BlockStructure(j.at("blocks").get<std::vector<int>>());
  if (j.at("m").get<int>() != p.blocks.total())
    throw std::invalid_argument("m does not match the block dimensions");

  const json& obj = j.at("objective");
  const std::string type = obj.at("type").get<std::string>();
  if (type == "quadratic") {
    p.objective.kind = ObjectiveSpec::Kind::quadratic;
    p.objective.Q = matrix_from_json(obj.at("Q"));
    p.objective.c = vector_from_json(obj.at("c"));
  } else if (type.rfind("registry:", 0) == 0) {
    p.objective.kind = ObjectiveSpec::Kind::registry;
    p.objective.registry_name = type.substr(9);
  } else {
    throw std::invalid_argument("unknown objective type: " + type);
  }

  const json& cons = j.at("constraints");
  p.A = matrix_from_json(cons.at("A"));
  p.b = vector_from_json(cons.at("b"));
  if (p.A.rows() == 0) p.A.resize(0, p.m());
  p.start = vector_from_json(j.at("start"));
  if (j.contains("solution")) p.solution = vector_from_json(j.at("solution"));
  if (j.contains("notes")) p.notes = j.at("notes").get<std::string>();
  return p;
}

Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return problem_from_json(buf.str());
}

void save_problem(const std::string& path, const Problem& p) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write problem file: " + path);
  out << problem_to_json(p);
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string trace_to_csv(const IterateTrace& trace, int m) {
  std::ostringstream out;
  out << "k,f,residual,alpha,block,active_set,t_wall_ms";
  for (int i = 0; i < m; ++i) out << ",lambda_" << i;
  out << "\n";
  for (const auto& rec : trace.records) {
    out << rec.k << "," << format_double(rec.f_value) << "," << format_double(rec.residual)
        << "," << format_double(rec.alpha) << "," << rec.block << ",";
    for (size_t i = 0; i < rec.active.size(); ++i) {
      if (i) out << ";";
      out << rec.active[i];
    }
    out << "," << format_double(rec.t_wall_ms);
    for (int i = 0; i < m; ++i) out << "," << format_double(rec.point[i]);
    out << "\n";
  }
  return out.str();
}

void write_trace_csv(const std::string& path, const IterateTrace& trace, int m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << trace_to_csv(trace, m);
}

}  // namespace polycd
