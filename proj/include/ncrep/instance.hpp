#pragma once

// Instance files: JSON objects describing (n, M, D, A, state, character).
//
//   {"n": 2,
//    "M": "full" | {"generators": [matrix, ...]},            optional, default full
//    "D": {"blocks": [[0], [1]]} | {"generators": [...]},
//    "A": {"triangular_over": [[0], [1]]} | {"generators": [...]},   optional
//    "state": "tracial" | {"density": matrix, "normalize": true},
//    "character": "block_compression" | {"matrix": n^2 x n^2 matrix},  optional
//    "frame": unitary matrix}                                  optional
//
// Indices are 0-based. A matrix is an array of rows, each an array of
// [re, im] pairs (a bare number is read as real). A character matrix C acts
// on row-major vectorizations: Phi(X)[i][j] = sum C[i*n+j][k*n+l] X[k][l].
// The frame U conjugates block-specified D and A and the block compression.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncrep/hoffman_rossi.hpp"

namespace ncrep {

using Json = nlohmann::json;

struct AlgebraSpec {
  std::optional<Partition> blocks;  // D: "blocks", A: "triangular_over"
  std::vector<ComplexMatrix> generators;
};

struct InstanceSpec {
  Index n = 0;
  std::optional<std::vector<ComplexMatrix>> m_generators;
  AlgebraSpec d;
  std::optional<AlgebraSpec> a;
  bool tracial = true;
  std::optional<ComplexMatrix> density;
  bool normalize = true;
  bool block_compression = false;
  std::optional<ComplexMatrix> character_matrix;  // row-major convention, as stored
  std::optional<ComplexMatrix> frame;
};

/// Validated, built instance.
struct Instance {
  InstanceSpec spec;
  StarAlgebra m;
  StarAlgebra d;
  std::optional<Subalgebra> a;
  PositiveFunctional state;
  std::optional<DCharacter> phi;
};

namespace detail {

[[noreturn]] inline void parse_fail(const std::string& what) { fail(ErrorCode::ParseError, what); }

inline Complex parse_scalar(const Json& j, const std::string& where) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  parse_fail(where + ": expected [re, im] or a number");
}

inline ComplexMatrix parse_matrix(const Json& j, Index rows, const std::string& where) {
  if (!j.is_array()) parse_fail(where + ": expected an array of rows");
  if (static_cast<Index>(j.size()) != rows) {
    std::ostringstream os;
    os << where << ": expected " << rows << " rows, got " << j.size();
    parse_fail(os.str());
  }
  ComplexMatrix m(rows, rows);
  for (Index i = 0; i < rows; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != rows) {
      std::ostringstream os;
      os << where << ": row " << i << " must have " << rows << " entries";
      parse_fail(os.str());
    }
    for (Index k = 0; k < rows; ++k) m(i, k) = parse_scalar(row[static_cast<std::size_t>(k)], where);
  }
  if (!m.allFinite()) parse_fail(where + ": non-finite entry");
  return m;
}

inline Json matrix_to_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back({m(i, k).real(), m(i, k).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Partition parse_partition(const Json& j, Index n, const std::string& where) {
  if (!j.is_array()) parse_fail(where + ": expected an array of index arrays");
  Partition p;
  for (const auto& blk : j) {
    if (!blk.is_array()) parse_fail(where + ": block must be an array");
    std::vector<Index> b;
    for (const auto& i : blk) {
      if (!i.is_number_integer()) parse_fail(where + ": indices must be integers");
      b.push_back(i.get<Index>());
    }
    p.push_back(std::move(b));
  }
  validate_partition(n, p);
  return p;
}

inline std::vector<ComplexMatrix> parse_generators(const Json& j, Index n, const std::string& where) {
  if (!j.is_array() || j.empty()) parse_fail(where + ": expected a nonempty array of matrices");
  std::vector<ComplexMatrix> g;
  for (const auto& m : j) g.push_back(parse_matrix(m, n, where));
  return g;
}

inline AlgebraSpec parse_algebra(const Json& j, Index n, const char* blocks_key, const std::string& where) {
  if (!j.is_object()) parse_fail(where + ": expected an object");
  AlgebraSpec s;
  if (j.contains(blocks_key)) s.blocks = parse_partition(j.at(blocks_key), n, where + "." + blocks_key);
  else if (j.contains("generators")) s.generators = parse_generators(j.at("generators"), n, where + ".generators");
  else parse_fail(where + ": needs \"" + blocks_key + "\" or \"generators\"");
  return s;
}

/// Row-major vec convention -> column-major superoperator.
inline SuperOperator character_from_row_major(const ComplexMatrix& c, Index n) {
  SuperOperator t(n * n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) t(j * n + i, l * n + k) = c(i * n + j, k * n + l);
  return t;
}

inline ComplexMatrix character_to_row_major(const SuperOperator& t, Index n) {
  ComplexMatrix c(n * n, n * n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < n; ++k)
        for (Index l = 0; l < n; ++l) c(i * n + j, k * n + l) = t(j * n + i, l * n + k);
  return c;
}

}  // namespace detail

/// Structural parse only (shapes, types, partitions); throws ParseError.
inline InstanceSpec parse_instance_spec(const Json& j) {
  using namespace detail;
  if (!j.is_object()) parse_fail("instance must be a JSON object");
  InstanceSpec s;
  if (!j.contains("n") || !j.at("n").is_number_integer() || j.at("n").get<Index>() < 1)
    parse_fail("\"n\" must be a positive integer");
  s.n = j.at("n").get<Index>();
  const Index n = s.n;
  if (j.contains("frame")) s.frame = parse_matrix(j.at("frame"), n, "frame");
  if (j.contains("M")) {
    const Json& m = j.at("M");
    if (m.is_string() && m.get<std::string>() == "full") {
    } else if (m.is_object() && m.contains("generators")) {
      s.m_generators = parse_generators(m.at("generators"), n, "M.generators");
    } else {
      parse_fail("M: expected \"full\" or {\"generators\": [...]}");
    }
  }
  if (!j.contains("D")) parse_fail("missing \"D\"");
  s.d = parse_algebra(j.at("D"), n, "blocks", "D");
  if (j.contains("A")) s.a = parse_algebra(j.at("A"), n, "triangular_over", "A");
  if (!j.contains("state")) parse_fail("missing \"state\"");
  const Json& st = j.at("state");
  if (st.is_string() && st.get<std::string>() == "tracial") {
    s.tracial = true;
  } else if (st.is_object() && st.contains("density")) {
    s.tracial = false;
    s.density = parse_matrix(st.at("density"), n, "state.density");
    if (st.contains("normalize")) {
      if (!st.at("normalize").is_boolean()) parse_fail("state.normalize must be a boolean");
      s.normalize = st.at("normalize").get<bool>();
    } else {
      s.normalize = false;
    }
  } else {
    parse_fail("state: expected \"tracial\" or {\"density\": ...}");
  }
  if (j.contains("character")) {
    const Json& c = j.at("character");
    if (c.is_string() && c.get<std::string>() == "block_compression") {
      s.block_compression = true;
    } else if (c.is_object() && c.contains("matrix")) {
      s.character_matrix = parse_matrix(c.at("matrix"), n * n, "character.matrix");
    } else {
      parse_fail("character: expected \"block_compression\" or {\"matrix\": ...}");
    }
    if (!s.a) parse_fail("a character needs \"A\"");
  }
  return s;
}

/// Builds and validates every object; throws InvariantViolation (naming the
/// invariant and basis pair) or the specific error of the failing check.
inline Instance build_instance(const InstanceSpec& s) {
  const Index n = s.n;
  std::optional<ComplexMatrix> u = s.frame;
  if (u && (u->adjoint() * *u - identity(n)).norm() > tol(1e-9))
    fail(ErrorCode::InvariantViolation, "frame is not unitary");
  auto conj = [&](auto alg) { return u ? conjugate(alg, *u) : alg; };

  StarAlgebra m = s.m_generators ? generate_star_algebra(*s.m_generators, n) : StarAlgebra::full(n);
  StarAlgebra d = s.d.blocks ? conj(block_diagonal_algebra(n, *s.d.blocks)) : generate_star_algebra(s.d.generators, n);
  StarAlgebra::checked(d.basis());
  for (const auto& b : d.basis().basis())
    if (!m.contains(b)) fail(ErrorCode::InvariantViolation, "D is not contained in M");

  std::optional<Subalgebra> a;
  if (s.a) {
    Subalgebra alg = s.a->blocks ? conj(block_upper_triangular_algebra(n, *s.a->blocks))
                                 : generate_algebra(s.a->generators, n);
    Subalgebra::checked(alg.basis());
    for (const auto& b : d.basis().basis())
      if (!alg.contains(b)) fail(ErrorCode::InvariantViolation, "D is not contained in A");
    for (const auto& b : alg.basis().basis())
      if (!m.contains(b)) fail(ErrorCode::InvariantViolation, "A is not contained in M");
    a = std::move(alg);
  }

  PositiveFunctional state = PositiveFunctional::tracial(n);
  if (!s.tracial) state = s.normalize ? PositiveFunctional::normalized(*s.density) : PositiveFunctional::from_density(*s.density);

  std::optional<DCharacter> phi;
  if (s.block_compression) {
    if (!s.d.blocks) fail(ErrorCode::InvariantViolation, "block_compression needs D given by blocks");
    SuperOperator t = SuperOperator::Zero(n * n, n * n);
    for (const auto& b : *s.d.blocks) {
      ComplexMatrix p = ComplexMatrix::Zero(n, n);
      for (Index i : b) p(i, i) = 1.0;
      const ComplexMatrix q = u ? ComplexMatrix(*u * p * u->adjoint()) : p;
      t += sandwich_map(q, q);
    }
    phi = DCharacter::checked(*a, d, std::move(t));
  } else if (s.character_matrix) {
    phi = DCharacter::checked(*a, d, detail::character_from_row_major(*s.character_matrix, n));
  }
  return {s, std::move(m), std::move(d), std::move(a), std::move(state), std::move(phi)};
}

inline Json serialize_instance(const InstanceSpec& s) {
  using detail::matrix_to_json;
  Json j;
  j["n"] = s.n;
  if (s.m_generators) {
    Json g = Json::array();
    for (const auto& x : *s.m_generators) g.push_back(matrix_to_json(x));
    j["M"] = {{"generators", g}};
  } else {
    j["M"] = "full";
  }
  auto algebra = [](const AlgebraSpec& a, const char* key) {
    Json o;
    if (a.blocks) {
      o[key] = *a.blocks;
    } else {
      Json g = Json::array();
      for (const auto& x : a.generators) g.push_back(matrix_to_json(x));
      o["generators"] = g;
    }
    return o;
  };
  j["D"] = algebra(s.d, "blocks");
  if (s.a) j["A"] = algebra(*s.a, "triangular_over");
  if (s.tracial) j["state"] = "tracial";
  else j["state"] = {{"density", matrix_to_json(*s.density)}, {"normalize", s.normalize}};
  if (s.block_compression) j["character"] = "block_compression";
  else if (s.character_matrix) j["character"] = {{"matrix", matrix_to_json(*s.character_matrix)}};
  if (s.frame) j["frame"] = matrix_to_json(*s.frame);
  return j;
}

inline Instance parse_instance_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, e.what());
  }
  return build_instance(parse_instance_spec(j));
}

inline Instance parse_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_instance_json(ss.str());
}

/// Semantic distance between two built instances (0 when equal up to
/// rounding): algebras as subspaces, densities and character maps entrywise.
inline double instance_distance(const Instance& x, const Instance& y) {
  if (x.spec.n != y.spec.n) return std::numeric_limits<double>::infinity();
  double d = std::max(subspace_distance(x.m.basis(), y.m.basis()), subspace_distance(x.d.basis(), y.d.basis()));
  if (x.a.has_value() != y.a.has_value() || x.phi.has_value() != y.phi.has_value())
    return std::numeric_limits<double>::infinity();
  if (x.a) d = std::max(d, subspace_distance(x.a->basis(), y.a->basis()));
  d = std::max(d, (x.state.density() - y.state.density()).norm());
  if (x.phi) d = std::max(d, (x.phi->matrix() - y.phi->matrix()).norm());
  return d;
}

/// InstanceSpec of a block-character instance (for serializing suite failures).
inline InstanceSpec block_instance_spec(Index n, const Partition& blocks, const std::optional<ComplexMatrix>& frame,
                                        const std::optional<ComplexMatrix>& density) {
  InstanceSpec s;
  s.n = n;
  s.d.blocks = blocks;
  s.a = AlgebraSpec{blocks, {}};
  s.block_compression = true;
  s.frame = frame;
  if (density) {
    s.tracial = false;
    s.density = *density;
    s.normalize = true;
  }
  return s;
}

}  // namespace ncrep
