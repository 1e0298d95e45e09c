#pragma once

// Dense complex matrices, Hermitian functional calculus, Hilbert-Schmidt
// geometry on M_n and linear maps on M_n.
//
// Linear maps M_n -> M_n are stored as n^2 x n^2 matrices acting on the
// column-major vectorisation vec(X). With that convention
//   vec(A X B) = (B^T (x) A) vec(X).

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ncrep/config.hpp"
#include "ncrep/error.hpp"

namespace ncrep {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using SuperOperator = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// basic helpers

inline ComplexMatrix identity(Index n) { return ComplexMatrix::Identity(n, n); }

inline ComplexMatrix matrix_unit(Index n, Index i, Index j) {
  ComplexMatrix e = ComplexMatrix::Zero(n, n);
  e(i, j) = 1.0;
  return e;
}

inline ComplexVector vec(const ComplexMatrix& x) {
  return Eigen::Map<const ComplexVector>(x.data(), x.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Index n) {
  return Eigen::Map<const ComplexMatrix>(v.data(), n, n);
}

/// <X, Y> = Tr(Y* X), linear in the first slot.
inline Complex hs_inner(const ComplexMatrix& x, const ComplexMatrix& y) {
  return vec(y).dot(vec(x));
}

inline double hs_norm(const ComplexMatrix& x) { return x.norm(); }

inline bool all_finite(const ComplexMatrix& x) { return x.allFinite(); }

inline void require_square(const ComplexMatrix& x, const char* what) {
  if (x.rows() != x.cols() || x.rows() == 0) {
    std::ostringstream os;
    os << what << " must be a nonempty square matrix, got " << x.rows() << "x" << x.cols();
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

inline void require_dim(const ComplexMatrix& x, Index n, const char* what) {
  if (x.rows() != n || x.cols() != n) {
    std::ostringstream os;
    os << what << " has shape " << x.rows() << "x" << x.cols() << ", expected " << n << "x" << n;
    fail(ErrorCode::DimensionMismatch, os.str());
  }
}

inline void require_finite(const ComplexMatrix& x, const char* what) {
  if (!all_finite(x)) fail(ErrorCode::InvariantViolation, std::string(what) + " has non-finite entries");
}

/// Largest singular value.
inline double op_norm(const ComplexMatrix& x) {
  if (x.size() == 0) return 0.0;
  Eigen::JacobiSVD<ComplexMatrix> svd(x);
  return svd.singularValues()(0);
}

inline double min_singular_value(const ComplexMatrix& x) {
  Eigen::JacobiSVD<ComplexMatrix> svd(x);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& x) { return 0.5 * (x + x.adjoint()); }

inline ComplexMatrix commutator(const ComplexMatrix& x, const ComplexMatrix& y) { return x * y - y * x; }

inline bool is_hermitian(const ComplexMatrix& x, double atol = tolerance::hermitian) {
  if (x.rows() != x.cols()) return false;
  return (x - x.adjoint()).norm() <= tol(atol) * std::max(1.0, x.norm());
}

// ---------------------------------------------------------------------------
// Hermitian spectrum and functional calculus

struct HermitianSpectrum {
  RealVector eigenvalues;       // ascending
  ComplexMatrix eigenvectors;   // unitary, columns

  ComplexMatrix reconstruct() const {
    return eigenvectors * eigenvalues.cast<Complex>().asDiagonal() * eigenvectors.adjoint();
  }
  double spectral_norm() const {
    if (eigenvalues.size() == 0) return 0.0;
    return std::max(std::abs(eigenvalues(0)), std::abs(eigenvalues(eigenvalues.size() - 1)));
  }
  double min() const { return eigenvalues(0); }
  double max() const { return eigenvalues(eigenvalues.size() - 1); }
};

inline HermitianSpectrum hermitian_spectrum(const ComplexMatrix& x) {
  require_square(x, "matrix");
  require_finite(x, "matrix");
  if (!is_hermitian(x)) {
    std::ostringstream os;
    os << "|X - X*| = " << (x - x.adjoint()).norm();
    fail(ErrorCode::NotHermitian, os.str());
  }
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(x));
  return {es.eigenvalues(), es.eigenvectors()};
}

/// Positive-definiteness threshold for a spectrum: min eigenvalue must exceed
/// pd * spectral norm.
inline double pd_threshold(const HermitianSpectrum& s) {
  return tol(tolerance::pd) * std::max(s.spectral_norm(), tol(tolerance::absolute));
}

inline bool is_positive_definite(const ComplexMatrix& x) {
  if (!is_hermitian(x)) return false;
  auto s = hermitian_spectrum(x);
  return s.min() > pd_threshold(s);
}

inline bool is_positive_semidefinite(const ComplexMatrix& x) {
  if (!is_hermitian(x)) return false;
  auto s = hermitian_spectrum(x);
  return s.min() >= -pd_threshold(s);
}

/// Scalar functions admitted by herm_funcalc.
class ScalarFunction {
 public:
  enum class Kind { Sqrt, Log, Pow, Exp, PowerIt };

  static ScalarFunction sqrt() { return {Kind::Sqrt, 0.0}; }
  static ScalarFunction log() { return {Kind::Log, 0.0}; }
  static ScalarFunction pow(double p) { return {Kind::Pow, p}; }
  static ScalarFunction exp() { return {Kind::Exp, 0.0}; }
  /// lambda -> lambda^{it}
  static ScalarFunction power_it(double t) { return {Kind::PowerIt, t}; }

  Kind kind() const { return kind_; }
  double parameter() const { return param_; }

  bool requires_positive_definite() const {
    return kind_ == Kind::Log || kind_ == Kind::PowerIt || (kind_ == Kind::Pow && param_ < 0.0);
  }

  Complex operator()(double lambda) const {
    switch (kind_) {
      case Kind::Sqrt: return std::sqrt(Complex(lambda, 0.0));
      case Kind::Log: return std::log(lambda);
      case Kind::Pow:
        if (param_ == 0.0) return 1.0;
        if (lambda >= 0.0) return std::pow(lambda, param_);
        return std::pow(Complex(lambda, 0.0), param_);
      case Kind::Exp: return std::exp(lambda);
      case Kind::PowerIt: return std::exp(Complex(0.0, param_ * std::log(lambda)));
    }
    return 0.0;
  }

 private:
  ScalarFunction(Kind k, double p) : kind_(k), param_(p) {}
  Kind kind_;
  double param_;
};

/// U f(diag) U* for Hermitian X. Eigenvalues within the positive-definiteness
/// threshold of zero are snapped to zero for sqrt and positive powers, so PSD
/// inputs give Hermitian results.
inline ComplexMatrix herm_funcalc(const ComplexMatrix& x, const ScalarFunction& f) {
  const HermitianSpectrum s = hermitian_spectrum(x);
  const double thr = pd_threshold(s);
  if (f.requires_positive_definite() && s.min() <= thr) {
    std::ostringstream os;
    os << "min eigenvalue " << s.min() << " <= threshold " << thr;
    fail(ErrorCode::NotPositiveDefinite, os.str());
  }
  ComplexVector fx(s.eigenvalues.size());
  bool real_valued = true;
  for (Index i = 0; i < fx.size(); ++i) {
    double lam = s.eigenvalues(i);
    if ((f.kind() == ScalarFunction::Kind::Sqrt || f.kind() == ScalarFunction::Kind::Pow) && lam < 0.0 &&
        lam >= -thr)
      lam = 0.0;
    fx(i) = f(lam);
    if (fx(i).imag() != 0.0) real_valued = false;
  }
  ComplexMatrix out = s.eigenvectors * fx.asDiagonal() * s.eigenvectors.adjoint();
  if (real_valued) out = hermitian_part(out);
  return out;
}

/// PSD square root; tiny negative eigenvalues are clamped.
inline ComplexMatrix psd_sqrt(const ComplexMatrix& x) {
  const HermitianSpectrum s = hermitian_spectrum(x);
  RealVector r = s.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  return hermitian_part(s.eigenvectors * r.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint());
}

/// Moore-Penrose pseudo-inverse of a PSD matrix, eigenvalues below the pd
/// threshold treated as zero. `power` lets callers ask for x^{+p}.
inline ComplexMatrix psd_pseudo_power(const ComplexMatrix& x, double power) {
  const HermitianSpectrum s = hermitian_spectrum(x);
  const double thr = pd_threshold(s);
  RealVector r(s.eigenvalues.size());
  for (Index i = 0; i < r.size(); ++i) {
    const double lam = s.eigenvalues(i);
    r(i) = lam > thr ? std::pow(lam, power) : 0.0;
  }
  return hermitian_part(s.eigenvectors * r.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint());
}

/// Spectral projection of a Hermitian matrix onto eigenvalues > thr.
inline ComplexMatrix spectral_projection_above(const ComplexMatrix& x, double thr) {
  const HermitianSpectrum s = hermitian_spectrum(x);
  const Index n = x.rows();
  ComplexMatrix p = ComplexMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    if (s.eigenvalues(i) > thr) p += s.eigenvectors.col(i) * s.eigenvectors.col(i).adjoint();
  return p;
}

// ---------------------------------------------------------------------------
// numerical rank and kernels

inline double rank_threshold(const RealVector& singular_values) {
  const double smax = singular_values.size() ? singular_values(0) : 0.0;
  return std::max(tol(tolerance::rank) * smax, tol(tolerance::absolute));
}

/// Orthonormal basis (columns) of the numerical kernel of L.
inline ComplexMatrix null_space(const ComplexMatrix& l) {
  const Index cols = l.cols();
  if (cols == 0) return ComplexMatrix(0, 0);
  if (l.rows() == 0) return ComplexMatrix::Identity(cols, cols);
  Eigen::JacobiSVD<ComplexMatrix, Eigen::ColPivHouseholderQRPreconditioner> svd(l, Eigen::ComputeFullV);
  const RealVector& sv = svd.singularValues();
  const double thr = rank_threshold(sv);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > thr) ++rank;
  return svd.matrixV().rightCols(cols - rank);
}

inline Index numerical_rank(const ComplexMatrix& l) {
  if (l.size() == 0) return 0;
  Eigen::JacobiSVD<ComplexMatrix, Eigen::ColPivHouseholderQRPreconditioner> svd(l);
  const RealVector& sv = svd.singularValues();
  const double thr = rank_threshold(sv);
  Index rank = 0;
  while (rank < sv.size() && sv(rank) > thr) ++rank;
  return rank;
}

// ---------------------------------------------------------------------------
// Hilbert-Schmidt subspaces

/// A subspace of M_n given by a Hilbert-Schmidt orthonormal basis. The basis
/// is also kept as the columns vec(b_i) of an n^2 x k matrix.
class OperatorSubspace {
 public:
  explicit OperatorSubspace(Index ambient_dim = 1)
      : n_(ambient_dim), coords_(ambient_dim * ambient_dim, 0) {}

  /// Columns must already be orthonormal; use orthonormalize() otherwise.
  static OperatorSubspace from_orthonormal_columns(Index n, ComplexMatrix columns) {
    OperatorSubspace s(n);
    s.coords_ = std::move(columns);
    s.basis_.reserve(static_cast<std::size_t>(s.coords_.cols()));
    for (Index k = 0; k < s.coords_.cols(); ++k) s.basis_.push_back(unvec(s.coords_.col(k), n));
    return s;
  }

  static OperatorSubspace full(Index n) {
    return from_orthonormal_columns(n, ComplexMatrix::Identity(n * n, n * n));
  }

  Index ambient_dim() const { return n_; }
  Index dim() const { return coords_.cols(); }
  const std::vector<ComplexMatrix>& basis() const { return basis_; }
  const ComplexMatrix& basis(Index i) const { return basis_[static_cast<std::size_t>(i)]; }
  const ComplexMatrix& columns() const { return coords_; }

  ComplexVector coordinates(const ComplexMatrix& x) const {
    require_dim(x, n_, "operand");
    return coords_.adjoint() * vec(x);
  }
  ComplexMatrix from_coordinates(const ComplexVector& c) const { return unvec(coords_ * c, n_); }
  ComplexMatrix project(const ComplexMatrix& x) const { return from_coordinates(coordinates(x)); }
  double residual(const ComplexMatrix& x) const { return (x - project(x)).norm(); }
  bool contains(const ComplexMatrix& x, double rtol = tolerance::membership) const {
    return residual(x) <= tol(rtol) * std::max(1.0, x.norm());
  }
  SuperOperator projector() const { return coords_ * coords_.adjoint(); }
  double gram_deviation() const {
    return (coords_.adjoint() * coords_ - ComplexMatrix::Identity(dim(), dim())).cwiseAbs().maxCoeff();
  }

 private:
  Index n_;
  ComplexMatrix coords_;
  std::vector<ComplexMatrix> basis_;
};

/// Modified Gram-Schmidt (with one re-orthogonalisation pass) over columns of
/// an n^2 x m matrix; columns whose residual is below dep_tol times the
/// largest input norm are discarded.
inline OperatorSubspace orthonormalize_columns(Index n, const ComplexMatrix& cols,
                                               double dep_tol = tolerance::dependence) {
  double largest = 0.0;
  for (Index j = 0; j < cols.cols(); ++j) largest = std::max(largest, cols.col(j).norm());
  const double cutoff = tol(dep_tol) * largest;
  std::vector<ComplexVector> q;
  for (Index j = 0; j < cols.cols(); ++j) {
    ComplexVector v = cols.col(j);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : q) v -= u.dot(v) * u;
    const double nv = v.norm();
    if (largest == 0.0 || nv <= cutoff) continue;
    q.push_back(v / nv);
  }
  ComplexMatrix out(n * n, static_cast<Index>(q.size()));
  for (std::size_t k = 0; k < q.size(); ++k) out.col(static_cast<Index>(k)) = q[k];
  return OperatorSubspace::from_orthonormal_columns(n, std::move(out));
}

inline OperatorSubspace orthonormalize(std::span<const ComplexMatrix> spanning_set,
                                       double dep_tol = tolerance::dependence) {
  if (spanning_set.empty()) fail(ErrorCode::EmptyInput, "orthonormalize needs at least one matrix");
  const Index n = spanning_set.front().rows();
  ComplexMatrix cols(n * n, static_cast<Index>(spanning_set.size()));
  for (std::size_t k = 0; k < spanning_set.size(); ++k) {
    require_dim(spanning_set[k], n, "spanning matrix");
    cols.col(static_cast<Index>(k)) = vec(spanning_set[k]);
  }
  return orthonormalize_columns(n, cols, dep_tol);
}

inline OperatorSubspace orthonormalize(const std::vector<ComplexMatrix>& spanning_set,
                                       double dep_tol = tolerance::dependence) {
  return orthonormalize(std::span<const ComplexMatrix>(spanning_set), dep_tol);
}

inline ComplexMatrix hs_project(const OperatorSubspace& s, const ComplexMatrix& x) {
  require_dim(x, s.ambient_dim(), "operand");
  return s.project(x);
}

/// Span of both subspaces.
inline OperatorSubspace subspace_sum(const OperatorSubspace& a, const OperatorSubspace& b) {
  ComplexMatrix cols(a.columns().rows(), a.dim() + b.dim());
  cols << a.columns(), b.columns();
  return orthonormalize_columns(a.ambient_dim(), cols);
}

/// U cap V computed as the kernel of (1 - P_V) restricted to U.
inline OperatorSubspace subspace_intersection(const OperatorSubspace& u, const OperatorSubspace& v) {
  const Index n = u.ambient_dim();
  if (u.dim() == 0 || v.dim() == 0) return OperatorSubspace(n);
  ComplexMatrix residual = u.columns() - v.columns() * (v.columns().adjoint() * u.columns());
  ComplexMatrix ker = null_space(residual);
  return orthonormalize_columns(n, u.columns() * ker);
}

/// Largest HS distance from a unit vector of one subspace to the other
/// (a symmetric gap); zero iff the subspaces coincide.
inline double subspace_distance(const OperatorSubspace& a, const OperatorSubspace& b) {
  if (a.ambient_dim() != b.ambient_dim()) fail(ErrorCode::DimensionMismatch, "subspaces live in different M_n");
  auto one_way = [](const OperatorSubspace& x, const OperatorSubspace& y) {
    if (x.dim() == 0) return 0.0;
    ComplexMatrix r = x.columns() - y.columns() * (y.columns().adjoint() * x.columns());
    return op_norm(r);
  };
  double d = std::max(one_way(a, b), one_way(b, a));
  if (a.dim() != b.dim()) d = std::max(d, 1.0);
  return d;
}

// ---------------------------------------------------------------------------
// linear maps on M_n

inline ComplexMatrix apply(const SuperOperator& t, const ComplexMatrix& x) {
  const Index n = x.rows();
  return unvec(t * vec(x), n);
}

inline SuperOperator kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

/// X -> A X B
inline SuperOperator sandwich_map(const ComplexMatrix& a, const ComplexMatrix& b) {
  return kron(b.transpose(), a);
}

inline SuperOperator left_multiplication(const ComplexMatrix& a) {
  return kron(ComplexMatrix::Identity(a.rows(), a.rows()), a);
}

inline SuperOperator right_multiplication(const ComplexMatrix& b) {
  return kron(b.transpose(), ComplexMatrix::Identity(b.rows(), b.rows()));
}

/// X -> L X - X L
inline SuperOperator commutator_map(const ComplexMatrix& l) {
  const Index n = l.rows();
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  return kron(id, l) - kron(l.transpose(), id);
}

/// Row vector w with Tr(rho X) = w * vec(X).
inline Eigen::RowVectorXcd trace_pairing_row(const ComplexMatrix& rho) {
  return vec(rho.transpose()).transpose();
}

/// Inverse of trace_pairing_row.
inline ComplexMatrix density_from_row(const Eigen::RowVectorXcd& w, Index n) {
  return unvec(w.transpose(), n).transpose();
}

}  // namespace ncrep
