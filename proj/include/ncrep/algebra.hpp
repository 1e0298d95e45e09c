#pragma once

// Unital subalgebras of M_n represented by Hilbert-Schmidt orthonormal bases.

#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include "ncrep/matrix_core.hpp"

namespace ncrep {

using Partition = std::vector<std::vector<Index>>;

/// Checks that `blocks` is an ordered partition of {0, ..., n-1}.
inline void validate_partition(Index n, const Partition& blocks) {
  if (n <= 0) fail(ErrorCode::BadPartition, "ambient dimension must be positive");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (const auto& b : blocks) {
    if (b.empty()) fail(ErrorCode::BadPartition, "empty block");
    for (Index i : b) {
      if (i < 0 || i >= n) {
        std::ostringstream os;
        os << "index " << i << " outside 0.." << n - 1;
        fail(ErrorCode::BadPartition, os.str());
      }
      if (seen[static_cast<std::size_t>(i)]++) {
        std::ostringstream os;
        os << "index " << i << " appears twice";
        fail(ErrorCode::BadPartition, os.str());
      }
    }
  }
  for (Index i = 0; i < n; ++i)
    if (!seen[static_cast<std::size_t>(i)]) {
      std::ostringstream os;
      os << "index " << i << " not covered";
      fail(ErrorCode::BadPartition, os.str());
    }
}

/// Block-upper-triangular layout of a subalgebra, recorded when the algebra is
/// built from an ordered partition: A = frame * T(blocks) * frame^*.
struct TriangularStructure {
  Partition blocks;
  ComplexMatrix frame;  // unitary
};

/// Worst residuals found when checking the algebra axioms on a basis.
struct AlgebraCheck {
  double unit_residual = 0.0;
  double adjoint_residual = 0.0;
  double product_residual = 0.0;
  std::string worst_pair;

  bool ok(double atol = 1e-9) const {
    const double t = tol(atol);
    return unit_residual <= t && adjoint_residual <= t && product_residual <= t;
  }
};

namespace detail {

inline AlgebraCheck check_algebra_axioms(const OperatorSubspace& s, const ComplexMatrix& unit, bool need_adjoint) {
  AlgebraCheck c;
  c.unit_residual = s.residual(unit);
  const auto& b = s.basis();
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (need_adjoint) {
      const double r = s.residual(b[i].adjoint());
      if (r > c.adjoint_residual) c.adjoint_residual = r;
    }
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double r = s.residual(b[i] * b[j]);
      if (r > c.product_residual) {
        c.product_residual = r;
        std::ostringstream os;
        os << "(" << i << "," << j << ")";
        c.worst_pair = os.str();
      }
    }
  }
  return c;
}

inline void throw_if_violated(const AlgebraCheck& c, bool need_adjoint, const char* what) {
  const double t = tol(1e-9);
  std::ostringstream os;
  if (c.unit_residual > t) {
    os << what << ": unit not in span (residual " << c.unit_residual << ")";
    fail(ErrorCode::InvariantViolation, os.str());
  }
  if (need_adjoint && c.adjoint_residual > t) {
    os << what << ": not closed under adjoint (residual " << c.adjoint_residual << ")";
    fail(ErrorCode::InvariantViolation, os.str());
  }
  if (c.product_residual > t) {
    os << what << ": not closed under product at basis pair " << c.worst_pair << " (residual "
       << c.product_residual << ")";
    fail(ErrorCode::InvariantViolation, os.str());
  }
}

}  // namespace detail

/// Unital (not necessarily self-adjoint) subalgebra; houses the A of D in A in M.
class Subalgebra {
 public:
  static Subalgebra checked(OperatorSubspace basis, std::optional<ComplexMatrix> unit = std::nullopt) {
    Subalgebra a(std::move(basis), std::move(unit));
    detail::throw_if_violated(a.check(), false, "subalgebra");
    return a;
  }
  static Subalgebra trusted(OperatorSubspace basis, std::optional<ComplexMatrix> unit = std::nullopt) {
    return Subalgebra(std::move(basis), std::move(unit));
  }

  Index ambient_dim() const { return basis_.ambient_dim(); }
  Index dim() const { return basis_.dim(); }
  const OperatorSubspace& basis() const { return basis_; }
  const ComplexMatrix& unit() const { return unit_; }
  bool is_unital() const { return (unit_ - identity(ambient_dim())).norm() == 0.0; }
  ComplexMatrix project(const ComplexMatrix& x) const { return basis_.project(x); }
  bool contains(const ComplexMatrix& x) const { return basis_.contains(x); }

  const std::optional<TriangularStructure>& triangular() const { return triangular_; }
  Subalgebra with_triangular(TriangularStructure t) const {
    Subalgebra copy = *this;
    copy.triangular_ = std::move(t);
    return copy;
  }

  AlgebraCheck check() const { return detail::check_algebra_axioms(basis_, unit_, false); }

 private:
  Subalgebra(OperatorSubspace basis, std::optional<ComplexMatrix> unit)
      : basis_(std::move(basis)),
        unit_(unit ? std::move(*unit) : identity(basis_.ambient_dim())) {}

  OperatorSubspace basis_;
  ComplexMatrix unit_;
  std::optional<TriangularStructure> triangular_;
};

/// Self-adjoint subalgebra of M_n (a finite-dimensional von Neumann algebra).
/// The unit is I except for corners eMe, whose unit is the projection e.
class StarAlgebra {
 public:
  static StarAlgebra checked(OperatorSubspace basis, std::optional<ComplexMatrix> unit = std::nullopt) {
    StarAlgebra a(std::move(basis), std::move(unit));
    detail::throw_if_violated(a.check(), true, "*-algebra");
    return a;
  }
  static StarAlgebra trusted(OperatorSubspace basis, std::optional<ComplexMatrix> unit = std::nullopt) {
    return StarAlgebra(std::move(basis), std::move(unit));
  }

  static StarAlgebra full(Index n) { return trusted(OperatorSubspace::full(n)); }
  static StarAlgebra scalars(Index n) {
    return trusted(orthonormalize(std::vector<ComplexMatrix>{identity(n)}));
  }

  Index ambient_dim() const { return basis_.ambient_dim(); }
  Index dim() const { return basis_.dim(); }
  const OperatorSubspace& basis() const { return basis_; }
  const ComplexMatrix& unit() const { return unit_; }
  bool is_unital() const { return (unit_ - identity(ambient_dim())).norm() == 0.0; }
  bool is_full() const { return dim() == ambient_dim() * ambient_dim(); }
  ComplexMatrix project(const ComplexMatrix& x) const { return is_full() ? x : basis_.project(x); }
  bool contains(const ComplexMatrix& x) const { return basis_.contains(x); }

  Subalgebra as_subalgebra() const { return Subalgebra::trusted(basis_, unit_); }

  AlgebraCheck check() const { return detail::check_algebra_axioms(basis_, unit_, true); }

  bool is_abelian(double atol = 1e-9) const {
    const auto& b = basis_.basis();
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = i + 1; j < b.size(); ++j)
        if (commutator(b[i], b[j]).norm() > tol(atol)) return false;
    return true;
  }

 private:
  StarAlgebra(OperatorSubspace basis, std::optional<ComplexMatrix> unit)
      : basis_(std::move(basis)), unit_(unit ? std::move(*unit) : identity(basis_.ambient_dim())) {}

  OperatorSubspace basis_;
  ComplexMatrix unit_;
};

// ---------------------------------------------------------------------------
// standard algebras

/// Block-diagonal algebra over an ordered partition.
inline StarAlgebra block_diagonal_algebra(Index n, const Partition& blocks) {
  validate_partition(n, blocks);
  std::vector<ComplexMatrix> units;
  for (const auto& b : blocks)
    for (Index i : b)
      for (Index j : b) units.push_back(matrix_unit(n, i, j));
  return StarAlgebra::trusted(orthonormalize(units));
}

inline StarAlgebra diagonal_algebra(Index n) {
  Partition p;
  for (Index i = 0; i < n; ++i) p.push_back({i});
  return block_diagonal_algebra(n, p);
}

/// span{E_ab : a in block i, b in block j, i <= j}.
inline Subalgebra block_upper_triangular_algebra(Index n, const Partition& blocks) {
  validate_partition(n, blocks);
  std::vector<ComplexMatrix> units;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi)
    for (std::size_t bj = bi; bj < blocks.size(); ++bj)
      for (Index a : blocks[bi])
        for (Index b : blocks[bj]) units.push_back(matrix_unit(n, a, b));
  return Subalgebra::trusted(orthonormalize(units)).with_triangular({blocks, identity(n)});
}

/// Wedderburn-type layout: a list of (block size k, multiplicity m) with
/// sum k*m = n, realising (+)_i M_{k_i} (x) 1_{m_i} in consecutive indices.
struct MultiplicityStructure {
  std::vector<std::pair<Index, Index>> blocks;

  Index dimension() const {
    Index n = 0;
    for (auto [k, m] : blocks) n += k * m;
    return n;
  }
};

/// (+)_i M_{k_i} (x) 1_{m_i}, conjugated by `frame` when given.
inline StarAlgebra multiplicity_algebra(const MultiplicityStructure& s,
                                        const std::optional<ComplexMatrix>& frame = std::nullopt) {
  const Index n = s.dimension();
  std::vector<ComplexMatrix> basis;
  Index offset = 0;
  for (auto [k, m] : s.blocks) {
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) {
        ComplexMatrix x = ComplexMatrix::Zero(n, n);
        for (Index mu = 0; mu < m; ++mu) x(offset + a * m + mu, offset + b * m + mu) = 1.0;
        if (frame) x = (*frame) * x * frame->adjoint();
        basis.push_back(x);
      }
    offset += k * m;
  }
  return StarAlgebra::trusted(orthonormalize(basis));
}

/// The commutant of multiplicity_algebra(s): (+)_i 1_{k_i} (x) M_{m_i}.
inline StarAlgebra multiplicity_commutant(const MultiplicityStructure& s,
                                          const std::optional<ComplexMatrix>& frame = std::nullopt) {
  MultiplicityStructure swapped;
  for (auto [k, m] : s.blocks) swapped.blocks.push_back({m, k});
  const Index n = s.dimension();
  std::vector<ComplexMatrix> basis;
  Index offset = 0;
  for (auto [k, m] : s.blocks) {
    for (Index mu = 0; mu < m; ++mu)
      for (Index nu = 0; nu < m; ++nu) {
        ComplexMatrix x = ComplexMatrix::Zero(n, n);
        for (Index a = 0; a < k; ++a) x(offset + a * m + mu, offset + a * m + nu) = 1.0;
        if (frame) x = (*frame) * x * frame->adjoint();
        basis.push_back(x);
      }
    offset += k * m;
  }
  return StarAlgebra::trusted(orthonormalize(basis));
}

inline OperatorSubspace conjugate_subspace(const OperatorSubspace& s, const ComplexMatrix& u) {
  std::vector<ComplexMatrix> b;
  if (s.dim() == 0) return OperatorSubspace(s.ambient_dim());
  for (const auto& x : s.basis()) b.push_back(u * x * u.adjoint());
  return orthonormalize(b);
}

inline StarAlgebra conjugate(const StarAlgebra& a, const ComplexMatrix& u) {
  return StarAlgebra::trusted(conjugate_subspace(a.basis(), u), u * a.unit() * u.adjoint());
}

inline Subalgebra conjugate(const Subalgebra& a, const ComplexMatrix& u) {
  Subalgebra out = Subalgebra::trusted(conjugate_subspace(a.basis(), u), u * a.unit() * u.adjoint());
  if (a.triangular()) out = out.with_triangular({a.triangular()->blocks, u * a.triangular()->frame});
  return out;
}

/// The corner e S e of a *-algebra, with unit e. Requires e in S.
inline StarAlgebra corner(const StarAlgebra& s, const ComplexMatrix& e) {
  std::vector<ComplexMatrix> b;
  for (const auto& x : s.basis().basis()) b.push_back(e * x * e);
  if (b.empty()) return StarAlgebra::trusted(OperatorSubspace(s.ambient_dim()), e);
  return StarAlgebra::trusted(orthonormalize(b), e);
}

/// {x : x^* in S}
inline OperatorSubspace adjoint_subspace(const OperatorSubspace& s) {
  ComplexMatrix cols(s.columns().rows(), s.dim());
  for (Index k = 0; k < s.dim(); ++k) cols.col(k) = vec(s.basis(k).adjoint());
  return OperatorSubspace::from_orthonormal_columns(s.ambient_dim(), std::move(cols));
}

// ---------------------------------------------------------------------------
// operations

/// Smallest unital *-algebra containing the generators: seed {I} with the
/// generators and their adjoints, then close under products until the
/// dimension stops growing.
inline StarAlgebra generate_star_algebra(const std::vector<ComplexMatrix>& generators, Index n) {
  if (generators.empty()) fail(ErrorCode::EmptyInput, "generate_star_algebra needs a generator");
  std::vector<ComplexMatrix> seed{identity(n)};
  for (const auto& g : generators) {
    require_dim(g, n, "generator");
    seed.push_back(g);
    seed.push_back(g.adjoint());
  }
  OperatorSubspace s = orthonormalize(seed);
  for (Index iter = 0; iter < n * n; ++iter) {
    const Index d = s.dim();
    ComplexMatrix cols(n * n, d + d * d);
    cols.leftCols(d) = s.columns();
    Index c = d;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) cols.col(c++) = vec(s.basis(i) * s.basis(j));
    OperatorSubspace next = orthonormalize_columns(n, cols);
    const bool stable = next.dim() == d;
    s = std::move(next);
    if (stable) break;
  }
  return StarAlgebra::trusted(std::move(s));
}

/// Smallest unital algebra (not *-closed) containing the generators.
inline Subalgebra generate_algebra(const std::vector<ComplexMatrix>& generators, Index n) {
  std::vector<ComplexMatrix> seed{identity(n)};
  for (const auto& g : generators) {
    require_dim(g, n, "generator");
    seed.push_back(g);
  }
  OperatorSubspace s = orthonormalize(seed);
  for (Index iter = 0; iter < n * n; ++iter) {
    const Index d = s.dim();
    ComplexMatrix cols(n * n, d + d * d);
    cols.leftCols(d) = s.columns();
    Index c = d;
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < d; ++j) cols.col(c++) = vec(s.basis(i) * s.basis(j));
    OperatorSubspace next = orthonormalize_columns(n, cols);
    const bool stable = next.dim() == d;
    s = std::move(next);
    if (stable) break;
  }
  return Subalgebra::trusted(std::move(s));
}

/// {x in within : x s = s x for every s in the set}.
inline StarAlgebra commutant_of_set(const std::vector<ComplexMatrix>& set, const StarAlgebra& within) {
  const Index n = within.ambient_dim();
  const Index w = within.dim();
  if (set.empty()) return within;
  ComplexMatrix l(n * n * static_cast<Index>(set.size()), w);
  for (std::size_t i = 0; i < set.size(); ++i) {
    require_dim(set[i], n, "commutant operand");
    for (Index c = 0; c < w; ++c)
      l.block(static_cast<Index>(i) * n * n, c, n * n, 1) = vec(commutator(within.basis().basis(c), set[i]));
  }
  const ComplexMatrix ker = null_space(l);
  if (ker.cols() == 0) return StarAlgebra::trusted(OperatorSubspace(n), within.unit());
  return StarAlgebra::trusted(orthonormalize_columns(n, within.basis().columns() * ker), within.unit());
}

inline StarAlgebra commutant(const StarAlgebra& s, const StarAlgebra& within) {
  if (s.ambient_dim() != within.ambient_dim()) fail(ErrorCode::DimensionMismatch, "commutant: ambient dims differ");
  return commutant_of_set(s.basis().basis(), within);
}

/// Commutant of a non-self-adjoint algebra is taken of A together with A^*, so
/// the result is again a *-algebra.
inline StarAlgebra commutant(const Subalgebra& s, const StarAlgebra& within) {
  if (s.ambient_dim() != within.ambient_dim()) fail(ErrorCode::DimensionMismatch, "commutant: ambient dims differ");
  std::vector<ComplexMatrix> set = s.basis().basis();
  for (const auto& b : s.basis().basis()) set.push_back(b.adjoint());
  return commutant_of_set(set, within);
}

/// Center of a *-algebra.
inline StarAlgebra center(const StarAlgebra& s) { return commutant(s, s); }

inline bool contains(const StarAlgebra& s, const ComplexMatrix& x) {
  require_dim(x, s.ambient_dim(), "operand");
  return s.contains(x);
}
inline bool contains(const Subalgebra& s, const ComplexMatrix& x) {
  require_dim(x, s.ambient_dim(), "operand");
  return s.contains(x);
}

/// A + A^* spans M.
inline bool check_ss_density(const Subalgebra& a, const StarAlgebra& m) {
  const OperatorSubspace star = adjoint_subspace(a.basis());
  ComplexMatrix cols(a.basis().columns().rows(), 2 * a.dim());
  cols << a.basis().columns(), star.columns();
  return numerical_rank(cols) == m.dim();
}

inline OperatorSubspace self_adjoint_part(const Subalgebra& a) {
  return subspace_intersection(a.basis(), adjoint_subspace(a.basis()));
}

/// span(A cap A^*) == span(D).
inline bool diagonal_part_check(const Subalgebra& a, const StarAlgebra& d) {
  return subspace_distance(self_adjoint_part(a), d.basis()) <= tol(1e-8);
}

/// Random element of the span of a basis with standard complex Gaussian coefficients.
template <class Rng>
ComplexMatrix random_element(const OperatorSubspace& s, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexVector c(s.dim());
  for (Index k = 0; k < c.size(); ++k) c(k) = Complex(g(rng), g(rng));
  return s.from_coordinates(c);
}

}  // namespace ncrep
