#pragma once

// D-characters and representing conditional expectations for them.

#include <limits>
#include <optional>
#include <vector>

#include "ncrep/expectations.hpp"

namespace ncrep {

/// Residuals of the D-character axioms.
struct CharacterCheck {
  double unit = 0.0;             // |Phi(1) - 1|
  double identity_on_D = 0.0;    // max |Phi(d) - d|
  double d_inside_A = 0.0;       // max residual of D basis in A
  double multiplicative = 0.0;   // max |Phi(ab) - Phi(a)Phi(b)|
  double bimodule = 0.0;         // max |Phi(da) - d Phi(a)|, |Phi(ad) - Phi(a) d|
  double range = 0.0;            // max |Phi(a) - P_D Phi(a)|
  double contractive = 0.0;      // max (|Phi(a)|_op - |a|_op) / |a|_op over probes
  Index kernel_dim = 0;
  Index splitting_rank = 0;      // rank of J + D
  Index a_dim = 0;
  Index d_dim = 0;
  std::string worst_pair;

  /// Name of the first violated invariant, empty if none.
  std::string failure() const {
    if (unit > tol(1e-9)) return "unital";
    if (d_inside_A > tol(1e-8)) return "D contained in A";
    if (identity_on_D > tol(1e-9)) return "identity on D";
    if (range > tol(1e-8)) return "range in D";
    if (multiplicative > tol(1e-8)) return "multiplicative";
    if (bimodule > tol(1e-8)) return "bimodule";
    if (splitting_rank != a_dim || kernel_dim + d_dim != a_dim) return "splitting A = J + D";
    if (contractive > tol(1e-8)) return "contractive";
    return {};
  }
  bool ok() const { return failure().empty(); }
};

/// Unital homomorphism Phi: A -> D that is the identity on D, stored as a map
/// on vec(x) (only its values on A matter).
class DCharacter {
 public:
  static DCharacter trusted(Subalgebra a, StarAlgebra d, SuperOperator map) {
    return DCharacter(std::move(a), std::move(d), std::move(map));
  }

  /// Throws InvariantViolation naming the failed invariant and basis pair.
  static DCharacter checked(Subalgebra a, StarAlgebra d, SuperOperator map) {
    DCharacter phi(std::move(a), std::move(d), std::move(map));
    const CharacterCheck c = phi.check();
    const std::string f = c.failure();
    if (!f.empty()) {
      std::ostringstream os;
      os << f;
      if (f == "multiplicative" || f == "bimodule") os << " at basis pair " << c.worst_pair;
      fail(ErrorCode::InvariantViolation, os.str());
    }
    return phi;
  }

  Index ambient_dim() const { return a_.ambient_dim(); }
  const Subalgebra& domain() const { return a_; }
  const StarAlgebra& range() const { return d_; }
  const SuperOperator& matrix() const { return map_; }
  const OperatorSubspace& kernel() const { return kernel_; }

  ComplexMatrix operator()(const ComplexMatrix& x) const {
    require_dim(x, ambient_dim(), "argument");
    return apply(map_, x);
  }

  CharacterCheck check(std::uint64_t seed = 0xc4a7, int probes = 4) const {
    CharacterCheck c;
    const Index n = ambient_dim();
    const DCharacter& self = *this;
    c.a_dim = a_.dim();
    c.d_dim = d_.dim();
    c.unit = (self(identity(n)) - identity(n)).norm();
    for (const auto& d : d_.basis().basis()) {
      c.identity_on_D = std::max(c.identity_on_D, (self(d) - d).norm());
      c.d_inside_A = std::max(c.d_inside_A, a_.basis().residual(d));
    }
    const auto& ab = a_.basis().basis();
    std::vector<ComplexMatrix> images;
    images.reserve(ab.size());
    for (const auto& x : ab) {
      images.push_back(self(x));
      c.range = std::max(c.range, d_.basis().residual(images.back()));
    }
    for (std::size_t i = 0; i < ab.size(); ++i)
      for (std::size_t j = 0; j < ab.size(); ++j) {
        const double r = (self(ab[i] * ab[j]) - images[i] * images[j]).norm();
        if (r > c.multiplicative) {
          c.multiplicative = r;
          std::ostringstream os;
          os << "(" << i << "," << j << ")";
          c.worst_pair = os.str();
        }
      }
    const auto& db = d_.basis().basis();
    for (std::size_t i = 0; i < db.size(); ++i)
      for (std::size_t j = 0; j < ab.size(); ++j) {
        const double l = (self(db[i] * ab[j]) - db[i] * images[j]).norm();
        const double r = (self(ab[j] * db[i]) - images[j] * db[i]).norm();
        if (std::max(l, r) > c.bimodule) {
          c.bimodule = std::max(l, r);
          if (c.multiplicative <= tol(1e-8)) {
            std::ostringstream os;
            os << "(d" << i << ",a" << j << ")";
            c.worst_pair = os.str();
          }
        }
      }
    c.kernel_dim = kernel_.dim();
    ComplexMatrix jd(n * n, kernel_.dim() + d_.dim());
    jd << kernel_.columns(), d_.basis().columns();
    c.splitting_rank = numerical_rank(jd);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < probes; ++k) {
      const ComplexMatrix x = random_element(a_.basis(), rng);
      const double nx = op_norm(x);
      c.contractive = std::max(c.contractive, (op_norm(self(x)) - nx) / nx);
    }
    return c;
  }

 private:
  DCharacter(Subalgebra a, StarAlgebra d, SuperOperator map) : a_(std::move(a)), d_(std::move(d)), map_(std::move(map)) {
    const Index n = a_.ambient_dim();
    if (d_.ambient_dim() != n || map_.rows() != n * n || map_.cols() != n * n)
      fail(ErrorCode::DimensionMismatch, "character map, A and D must act on the same M_n");
    const ComplexMatrix ker = null_space(map_ * a_.basis().columns());
    kernel_ = ker.cols() ? orthonormalize_columns(n, a_.basis().columns() * ker) : OperatorSubspace(n);
  }

  Subalgebra a_;
  StarAlgebra d_;
  SuperOperator map_;
  OperatorSubspace kernel_;
};

struct BlockCharacter {
  Subalgebra a;
  StarAlgebra d;
  DCharacter phi;
};

/// A = block upper triangular, D = block diagonal, Phi = block-diagonal
/// compression over an ordered partition, all conjugated by `frame` if given.
inline BlockCharacter make_block_character(Index n, const Partition& blocks,
                                           const std::optional<ComplexMatrix>& frame = std::nullopt) {
  validate_partition(n, blocks);
  Subalgebra a = block_upper_triangular_algebra(n, blocks);
  StarAlgebra d = block_diagonal_algebra(n, blocks);
  ComplexMatrix u = frame ? *frame : identity(n);
  if (frame) {
    require_dim(u, n, "frame");
    if ((u.adjoint() * u - identity(n)).norm() > tol(1e-9)) fail(ErrorCode::InvariantViolation, "frame must be unitary");
    a = conjugate(a, u);
    d = conjugate(d, u);
  }
  SuperOperator map = SuperOperator::Zero(n * n, n * n);
  for (const auto& b : blocks) {
    ComplexMatrix p = ComplexMatrix::Zero(n, n);
    for (Index i : b) p(i, i) = 1.0;
    const ComplexMatrix q = u * p * u.adjoint();
    map += sandwich_map(q, q);
  }
  DCharacter phi = DCharacter::trusted(a, d, std::move(map));
  return {std::move(a), std::move(d), std::move(phi)};
}

/// HS -> HS norm of (Psi - Phi) on A.
inline double extension_deviation(const ConditionalExpectation& psi, const DCharacter& phi) {
  return op_norm((psi.matrix() - phi.matrix()) * phi.domain().basis().columns());
}

// ---------------------------------------------------------------------------
// the Gram-type criterion on finite measure spaces

struct MthReport {
  bool holds = false;               // (sum f mu)^2 <= sum f^2 g mu for all f >= 0
  bool g_vanishes_on_support = false;
  double inverse_integral = 0.0;    // sum mu / g, +inf when g vanishes on supp mu
  double maximizer_ratio = 0.0;     // ratio at f = 1/g (the supremum)
};

/// Decides the inequality by g > 0 on supp mu and sum mu/g <= 1, and
/// cross-checks against the ratio at its maximizer f = 1/g.
inline MthReport mth_check(const RealVector& mu, const RealVector& g, double slack = 1e-9) {
  if (mu.size() != g.size() || mu.size() == 0) fail(ErrorCode::DimensionMismatch, "mu and g must be nonempty and equal length");
  if (!mu.allFinite() || !g.allFinite()) fail(ErrorCode::InvariantViolation, "mu and g must be finite");
  if ((mu.array() < 0.0).any() || (g.array() < 0.0).any()) fail(ErrorCode::InvariantViolation, "mu and g must be nonnegative");
  MthReport r;
  double s = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    if (mu(i) <= 0.0) continue;
    if (g(i) <= 0.0) {
      r.g_vanishes_on_support = true;
      break;
    }
    s += mu(i) / g(i);
  }
  if (r.g_vanishes_on_support) {
    r.inverse_integral = r.maximizer_ratio = std::numeric_limits<double>::infinity();
    r.holds = false;
    return r;
  }
  r.inverse_integral = s;
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < mu.size(); ++i)
    if (mu(i) > 0.0) {
      const double f = 1.0 / g(i);
      num += f * mu(i);
      den += f * f * g(i) * mu(i);
    }
  r.maximizer_ratio = den > 0.0 ? num * num / den : 0.0;
  if (std::abs(r.maximizer_ratio - s) > 1e-9 * std::max(1.0, s))
    fail(ErrorCode::InconsistencyDetected, "closed-form maximizer disagrees with the criterion");
  r.holds = s <= 1.0 + slack;
  return r;
}

// ---------------------------------------------------------------------------
// representing expectations

/// Output of a representing-measure pipeline. `omega` is the intermediate
/// state built from h before averaging; `rho` the averaged D-central state
/// with rho|A = sigma o Phi; `psi` the rho-preserving expectation extending Phi.
struct RepresentingMeasure {
  ConditionalExpectation psi;
  PositiveFunctional rho;
  PositiveFunctional omega;
  ComplexMatrix r, a, b, c, g, h;
  double a_norm2 = 0.0;                 // |a|_2^2 in the pipeline geometry
  double g_condition = 0.0;
  double dependence_tolerance = 0.0;
  double normalization_deviation = 0.0; // |E_D(h) - 1| (tracial) or |E^(1)(h) - k| (state)
  double kernel_annihilation = 0.0;     // max |omega(j)|
  double extension_deviation = 0.0;     // |Psi|A - Phi|
  double preservation_deviation = 0.0;  // |rho o Psi - rho|
  double restriction_deviation = 0.0;   // max |rho(x) - sigma(Phi(x))| over A basis
};

struct PipelineOptions {
  /// Use this r instead of the minimal-norm solution; it must solve the
  /// matching system.
  std::optional<ComplexMatrix> r_override;
  std::vector<double> dependence_ladder{1e-9, 1e-11, 1e-13, 1e-7};
};

namespace detail {

/// Minimal-HS-norm r in M with Tr(k r x) = target(x) for x in the A basis.
template <class Target>
ComplexMatrix solve_extension_functional(const StarAlgebra& m, const Subalgebra& a, const ComplexMatrix& weight,
                                         Target target) {
  const Index k = a.dim();
  ComplexMatrix s(k, m.dim());
  ComplexVector rhs(k);
  for (Index j = 0; j < k; ++j) {
    const ComplexMatrix xw = a.basis().basis(j) * weight;
    for (Index i = 0; i < m.dim(); ++i) s(j, i) = (m.basis().basis(i).transpose().cwiseProduct(xw)).sum();
    rhs(j) = target(a.basis().basis(j));
  }
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(s);
  cod.setThreshold(tol(tolerance::rank));
  const ComplexVector xi = cod.solve(rhs);
  const double res = (s * xi - rhs).norm();
  if (res > tol(1e-9) * std::max(1.0, rhs.norm()))
    fail(ErrorCode::InvariantViolation, "extension functional system is inconsistent");
  return m.basis().from_coordinates(xi);
}

template <class Target>
void check_extension_functional(const ComplexMatrix& r, const Subalgebra& a, const ComplexMatrix& weight, Target target) {
  double res = 0.0;
  for (const auto& x : a.basis().basis()) res = std::max(res, std::abs((r.transpose().cwiseProduct(x * weight)).sum() - target(x)));
  if (res > tol(1e-9)) {
    std::ostringstream os;
    os << "supplied r misses the matching system by " << res;
    fail(ErrorCode::InvariantViolation, os.str());
  }
}

/// r = a b^* with a = u|r|^{1/2}, b = |r|^{1/2}.
inline std::pair<ComplexMatrix, ComplexMatrix> polar_factor(const ComplexMatrix& r) {
  Eigen::JacobiSVD<ComplexMatrix> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const ComplexVector s = svd.singularValues().cwiseSqrt().cast<Complex>();
  const ComplexMatrix& w = svd.matrixU();
  const ComplexMatrix& v = svd.matrixV();
  return {w * s.asDiagonal() * v.adjoint(), hermitian_part(v * s.asDiagonal() * v.adjoint())};
}

/// Inverse square root of g in D with a conditioning guard.
inline ComplexMatrix guarded_inverse_sqrt(const ComplexMatrix& g, double& condition) {
  const HermitianSpectrum s = hermitian_spectrum(g);
  condition = s.min() > 0.0 ? s.max() / s.min() : std::numeric_limits<double>::infinity();
  if (!(condition <= 1e12)) {
    std::ostringstream os;
    os << "g has eigenvalues in [" << s.min() << ", " << s.max() << "], condition " << condition;
    fail(ErrorCode::GSingular, os.str());
  }
  return herm_funcalc(g, ScalarFunction::pow(-0.5));
}

inline double max_abs_on(const PositiveFunctional& w, const OperatorSubspace& s) {
  double m = 0.0;
  for (const auto& x : s.basis()) m = std::max(m, std::abs(w(x)));
  return m;
}

/// Shared tail: average, build Psi, certify the extension.
inline void finish_pipeline(RepresentingMeasure& out, const PositiveFunctional& reference, const StarAlgebra& m,
                            const StarAlgebra& d, const DCharacter& phi, const PositiveFunctional& sigma) {
  out.rho = average_to_central(out.omega, reference, d, m);
  out.psi = preserving_expectation(out.rho, d, m);
  out.extension_deviation = extension_deviation(out.psi, phi);
  out.preservation_deviation = preservation_deviation(out.psi, out.rho);
  double rd = 0.0;
  for (const auto& x : phi.domain().basis().basis()) rd = std::max(rd, std::abs(out.rho(x) - sigma(phi(x))));
  out.restriction_deviation = rd;
  if (out.extension_deviation > tol(1e-7)) {
    std::ostringstream os;
    os << "Psi restricted to A misses Phi by " << out.extension_deviation;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  if (out.preservation_deviation > tol(1e-8)) {
    std::ostringstream os;
    os << "rho o Psi misses rho by " << out.preservation_deviation;
    fail(ErrorCode::InvariantViolation, os.str());
  }
}

}  // namespace detail

/// Representing expectation for a D-character when M carries a faithful
/// tracial state tau. Works in L^2(M, tau) through x -> x t^{1/2}, t the
/// density of tau in M.
inline RepresentingMeasure representing_expectation_tracial(const StarAlgebra& m, const PositiveFunctional& tau,
                                                            const StarAlgebra& d, const Subalgebra& a,
                                                            const DCharacter& phi, const PipelineOptions& opt = {}) {
  const Index n = m.ambient_dim();
  if (!tau.is_state()) fail(ErrorCode::NotNormalized, "tau must be a state");
  if (!is_faithful_on(tau, m)) fail(ErrorCode::NotFaithful, "tau must be faithful on M");
  const TracialCertificate tc = tracial_certificate(tau, m);
  if (!tc.tracial) {
    std::ostringstream os;
    os << "tau is not tracial on M (" << tc.max_violation << ")";
    fail(ErrorCode::NotTracial, os.str());
  }
  const ComplexMatrix t = density_in(tau, m);
  const ComplexMatrix t_half = herm_funcalc(t, ScalarFunction::sqrt());
  const ComplexMatrix t_mhalf = herm_funcalc(t, ScalarFunction::pow(-0.5));
  const ConditionalExpectation ed = preserving_expectation(tau, d, m);
  auto tau_phi = [&](const ComplexMatrix& x) { return tau(phi(x)); };

  ComplexMatrix r;
  if (opt.r_override) {
    r = *opt.r_override;
    detail::check_extension_functional(r, a, t, tau_phi);
  } else {
    r = detail::solve_extension_functional(m, a, t, tau_phi);
  }
  const auto [fa, fb] = detail::polar_factor(r);

  std::optional<Error> last;
  for (double dep : opt.dependence_ladder) {
    try {
      ComplexMatrix ecols(n * n, a.dim());
      for (Index j = 0; j < a.dim(); ++j) ecols.col(j) = vec(a.basis().basis(j) * fa * t_half);
      const OperatorSubspace e = orthonormalize_columns(n, ecols, dep);
      const ComplexMatrix c = e.project(fb * t_half) * t_mhalf;
      const ComplexMatrix g = hermitian_part(ed(c * c.adjoint()));
      double cond = 0.0;
      const ComplexMatrix gmh = detail::guarded_inverse_sqrt(g, cond);
      const ComplexMatrix h = hermitian_part(gmh * c * c.adjoint() * gmh);
      RepresentingMeasure out{ed, tau, tau, r, fa, fb, c, g, h};
      out.a_norm2 = tau(fa.adjoint() * fa).real();
      out.g_condition = cond;
      out.dependence_tolerance = dep;
      out.normalization_deviation = op_norm(ed(h) - identity(n));
      if (out.normalization_deviation > tol(1e-7)) {
        std::ostringstream os;
        os << "E_D(h) misses 1 by " << out.normalization_deviation;
        fail(ErrorCode::InvariantViolation, os.str());
      }
      out.omega = PositiveFunctional::from_density(hermitian_part(t_half * h * t_half));
      out.kernel_annihilation = detail::max_abs_on(out.omega, phi.kernel());
      if (out.kernel_annihilation > tol(1e-8)) {
        std::ostringstream os;
        os << "omega does not annihilate ker Phi (" << out.kernel_annihilation << ")";
        fail(ErrorCode::InvariantViolation, os.str());
      }
      detail::finish_pipeline(out, tau, m, d, phi, tau);
      return out;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::GSingular) throw;
      last = err;
    }
  }
  throw *last;
}

/// Representing expectation relative to a faithful state omega with D in its
/// centralizer. Works with the plain trace pairing; k = density of omega and
/// the L^1 expectation E1(y) = k^{1/2} E_D(k^{-1/2} y k^{-1/2}) k^{1/2}.
inline RepresentingMeasure representing_expectation_state(const StarAlgebra& m, const PositiveFunctional& w,
                                                          const StarAlgebra& d, const Subalgebra& a,
                                                          const DCharacter& phi, const PipelineOptions& opt = {}) {
  const Index n = m.ambient_dim();
  if (!w.is_state()) fail(ErrorCode::NotNormalized, "omega must be a state");
  if (!is_faithful_on(w, m)) fail(ErrorCode::NotFaithful, "omega must be faithful on M");
  const CentralityReport cr = is_D_central(w, d, m);
  if (!cr.central) {
    std::ostringstream os;
    os << "D is not in the centralizer of omega (" << cr.max_violation << ")";
    fail(ErrorCode::NotCentral, os.str());
  }
  const ComplexMatrix k = density_in(w, m);
  const ComplexMatrix k_half = herm_funcalc(k, ScalarFunction::sqrt());
  const ComplexMatrix k_mhalf = herm_funcalc(k, ScalarFunction::pow(-0.5));
  const ConditionalExpectation ed = preserving_expectation(w, d, m);
  auto w_phi = [&](const ComplexMatrix& x) { return w(phi(x)); };

  ComplexMatrix r;
  if (opt.r_override) {
    r = *opt.r_override;
    detail::check_extension_functional(r, a, identity(n), w_phi);
  } else {
    r = detail::solve_extension_functional(m, a, identity(n), w_phi);
  }
  const auto [fa, fb] = detail::polar_factor(r);

  std::optional<Error> last;
  for (double dep : opt.dependence_ladder) {
    try {
      ComplexMatrix ecols(n * n, a.dim());
      for (Index j = 0; j < a.dim(); ++j) ecols.col(j) = vec(a.basis().basis(j) * fa);
      const OperatorSubspace e = orthonormalize_columns(n, ecols, dep);
      const ComplexMatrix c = e.project(fb);
      const ComplexMatrix g0 = hermitian_part(ed(k_mhalf * c * c.adjoint() * k_mhalf));
      double cond = 0.0;
      const ComplexMatrix g0mh = detail::guarded_inverse_sqrt(g0, cond);
      const ComplexMatrix h1 = g0mh * c;
      const ComplexMatrix h = hermitian_part(h1 * h1.adjoint());
      RepresentingMeasure out{ed, w, w, r, fa, fb, c, hermitian_part(g0 * k), h};
      out.a_norm2 = fa.squaredNorm();
      out.g_condition = cond;
      out.dependence_tolerance = dep;
      const ComplexMatrix e1h = k_half * ed(k_mhalf * h * k_mhalf) * k_half;
      out.normalization_deviation = op_norm(e1h - k) / std::max(1e-300, op_norm(k));
      if (out.normalization_deviation > tol(1e-7)) {
        std::ostringstream os;
        os << "E1(h) misses k by " << out.normalization_deviation;
        fail(ErrorCode::InvariantViolation, os.str());
      }
      out.omega = PositiveFunctional::from_density(h);
      out.kernel_annihilation = detail::max_abs_on(out.omega, phi.kernel());
      if (out.kernel_annihilation > tol(1e-8)) {
        std::ostringstream os;
        os << "theta does not annihilate ker Phi (" << out.kernel_annihilation << ")";
        fail(ErrorCode::InvariantViolation, os.str());
      }
      detail::finish_pipeline(out, w, m, d, phi, w);
      return out;
    } catch (const Error& err) {
      if (err.code() != ErrorCode::GSingular) throw;
      last = err;
    }
  }
  throw *last;
}

/// The spectral data (mu_i, |a|_2^2 g_i) of g on which the pipeline's
/// inequality tau(f)^2 <= |a|_2^2 tau(f^2 g) reads as the measure-space
/// criterion. mu_i is the reference weight of the i-th eigenprojection of g.
/// Meaningful for the tracial pipeline.
inline std::pair<RealVector, RealVector> pipeline_measure_space(const RepresentingMeasure& rm,
                                                                const PositiveFunctional& reference) {
  const HermitianSpectrum s = hermitian_spectrum(rm.g);
  const Index n = s.eigenvalues.size();
  RealVector mu(n), g(n);
  for (Index i = 0; i < n; ++i) {
    const ComplexMatrix p = s.eigenvectors.col(i) * s.eigenvectors.col(i).adjoint();
    mu(i) = reference(p).real();
    g(i) = rm.a_norm2 * s.eigenvalues(i);
  }
  return {mu, g};
}

/// Psi(x) = sum_t Psi_t(e_t x e_t) for orthogonal projections e_t central in
/// D summing to 1.
inline ConditionalExpectation compose_direct_sum(const std::vector<std::pair<ComplexMatrix, ConditionalExpectation>>& pieces,
                                                 const StarAlgebra& d, const StarAlgebra& m) {
  if (pieces.empty()) fail(ErrorCode::EmptyInput, "direct sum needs at least one piece");
  const Index n = m.ambient_dim();
  ComplexMatrix sum = ComplexMatrix::Zero(n, n);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const ComplexMatrix& e = pieces[i].first;
    require_dim(e, n, "projection");
    if ((e * e - e).norm() > tol(1e-9) || (e - e.adjoint()).norm() > tol(1e-9))
      fail(ErrorCode::ProjectionsNotPartition, "piece is not an orthogonal projection");
    for (std::size_t j = i + 1; j < pieces.size(); ++j)
      if ((e * pieces[j].first).norm() > tol(1e-9)) fail(ErrorCode::ProjectionsNotPartition, "projections are not orthogonal");
    sum += e;
  }
  if ((sum - identity(n)).norm() > tol(1e-9)) fail(ErrorCode::ProjectionsNotPartition, "projections do not sum to 1");
  SuperOperator t = SuperOperator::Zero(n * n, n * n);
  for (const auto& [e, psi] : pieces) {
    for (const auto& b : d.basis().basis())
      if (commutator(e, b).norm() > tol(1e-9)) fail(ErrorCode::NotCentralInD, "projection does not commute with D");
    if (!d.contains(e)) fail(ErrorCode::NotCentralInD, "projection is not in D");
    t += psi.matrix() * sandwich_map(e, e);
  }
  ConditionalExpectation out(std::move(t), m, d);
  out.validate();
  for (const auto& [e, psi] : pieces) {
    const double dev = op_norm((out.matrix() - psi.matrix()) * sandwich_map(e, e) * psi.domain().basis().columns());
    if (dev > tol(1e-8)) fail(ErrorCode::InvariantViolation, "direct sum does not extend a piece");
  }
  return out;
}

/// Abelian M: tau = sigma o E_D with E_D the trace-preserving expectation is
/// a faithful trace on M, and the tracial pipeline applies. The
/// rho-preserving extension is checked against an independent Gram build.
inline RepresentingMeasure representing_expectation_commutative(const StarAlgebra& m, const PositiveFunctional& sigma,
                                                                const StarAlgebra& d, const Subalgebra& a,
                                                                const DCharacter& phi) {
  if (!m.is_abelian()) fail(ErrorCode::NotAbelian, "M is not abelian");
  if (!is_faithful_on(sigma, d)) fail(ErrorCode::NotFaithful, "sigma must be faithful on D");
  // sigma o P_D has density P_D(rho_sigma) (P_D is HS-self-adjoint).
  const PositiveFunctional tau = PositiveFunctional::normalized(hermitian_part(d.project(density_in(sigma, d))));
  RepresentingMeasure rm = representing_expectation_tracial(m, tau, d, a, phi);
  const SuperOperator other = gram_expectation_map(rm.rho, d, m);
  const double dev = op_norm((rm.psi.matrix() - other) * m.basis().columns());
  if (dev > tol(1e-8)) fail(ErrorCode::InconsistencyDetected, "rho-preserving extension is not unique");
  return rm;
}

/// When A + A^* is dense in M, any state psi extending omega_D o Phi is
/// D-central; the psi-preserving expectation then extends Phi.
inline ConditionalExpectation extension_via_ss_density(const StarAlgebra& m, const PositiveFunctional& omega_d,
                                                       const StarAlgebra& d, const Subalgebra& a, const DCharacter& phi,
                                                       const PositiveFunctional& psi) {
  if (!check_ss_density(a, m)) fail(ErrorCode::NotDense, "A + A^* does not span M");
  double ext = 0.0;
  for (const auto& x : a.basis().basis()) ext = std::max(ext, std::abs(psi(x) - omega_d(phi(x))));
  if (ext > tol(1e-8)) {
    std::ostringstream os;
    os << "psi differs from omega_D o Phi on A by " << ext;
    fail(ErrorCode::NotAnExtension, os.str());
  }
  if (!is_D_central(psi, d, m).central)
    fail(ErrorCode::InconsistencyDetected, "extension of omega_D o Phi is not D-central despite density");
  ConditionalExpectation e = preserving_expectation(psi, d, m);
  if (extension_deviation(e, phi) > tol(1e-7)) fail(ErrorCode::InvariantViolation, "expectation does not extend Phi");
  return e;
}

}  // namespace ncrep
