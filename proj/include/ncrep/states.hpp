#pragma once

// Positive functionals x -> Tr(rho x), their supports, centralizers and
// modular dynamics.

#include <array>
#include <numbers>
#include <optional>
#include <vector>

#include "ncrep/algebra.hpp"

namespace ncrep {

/// omega(x) = Tr(rho x) with rho >= 0. All functionals here are finite, so the
/// domains on which a weight is finite are the whole algebra.
class PositiveFunctional {
 public:
  /// Validates rho Hermitian and PSD (min eigenvalue >= -1e-10 |rho|).
  static PositiveFunctional from_density(ComplexMatrix rho) {
    require_square(rho, "density");
    const HermitianSpectrum s = hermitian_spectrum(rho);
    if (s.min() < -tol(1e-10) * std::max(s.spectral_norm(), 1e-300)) {
      std::ostringstream os;
      os << "density has eigenvalue " << s.min();
      fail(ErrorCode::NotPositiveDefinite, os.str());
    }
    return PositiveFunctional(hermitian_part(rho), s);
  }

  /// Divides by the trace; the result is a state.
  static PositiveFunctional normalized(const ComplexMatrix& rho) {
    require_square(rho, "density");
    const double t = rho.trace().real();
    if (!(t > 0.0)) fail(ErrorCode::NotNormalized, "density has non-positive trace");
    return from_density(rho / t);
  }

  /// Requires Tr rho = 1 within 1e-10.
  static PositiveFunctional state(ComplexMatrix rho) {
    PositiveFunctional w = from_density(std::move(rho));
    if (!w.is_state()) {
      std::ostringstream os;
      os << "Tr rho = " << w.rho_.trace().real();
      fail(ErrorCode::NotNormalized, os.str());
    }
    return w;
  }

  /// Normalised trace Tr / n.
  static PositiveFunctional tracial(Index n) { return from_density(identity(n) / static_cast<double>(n)); }

  Index dim() const { return rho_.rows(); }
  const ComplexMatrix& density() const { return rho_; }
  const HermitianSpectrum& spectrum() const { return spectrum_; }
  double norm() const { return spectrum_.spectral_norm(); }

  Complex operator()(const ComplexMatrix& x) const {
    require_dim(x, dim(), "argument");
    return (rho_.transpose().cwiseProduct(x)).sum();
  }

  bool is_state() const { return std::abs(rho_.trace().real() - 1.0) <= tol(1e-10); }
  bool is_faithful() const { return spectrum_.min() > pd_threshold(spectrum_); }

  /// Spectral projection of rho above the pd threshold.
  const ComplexMatrix& support() const { return support_; }

 private:
  PositiveFunctional(ComplexMatrix rho, HermitianSpectrum s) : rho_(std::move(rho)), spectrum_(std::move(s)) {
    const Index n = rho_.rows();
    const double thr = pd_threshold(spectrum_);
    support_ = ComplexMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      if (spectrum_.eigenvalues(i) > thr)
        support_ += spectrum_.eigenvectors.col(i) * spectrum_.eigenvectors.col(i).adjoint();
  }

  ComplexMatrix rho_;
  HermitianSpectrum spectrum_;
  ComplexMatrix support_;
};

inline ComplexMatrix support_projection(const PositiveFunctional& w) { return w.support(); }

/// Density of omega restricted to M, i.e. the element of M representing it.
inline ComplexMatrix density_in(const PositiveFunctional& w, const StarAlgebra& m) {
  require_dim(w.density(), m.ambient_dim(), "density");
  return hermitian_part(m.project(w.density()));
}

inline PositiveFunctional restrict_to(const PositiveFunctional& w, const StarAlgebra& m) {
  return PositiveFunctional::from_density(density_in(w, m));
}

/// Gram matrix G_ij = omega(b_i^* b_j) on a basis.
inline ComplexMatrix gns_gram(const PositiveFunctional& w, const OperatorSubspace& s) {
  const Index k = s.dim();
  ComplexMatrix g(k, k);
  std::vector<ComplexMatrix> rb;
  rb.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) rb.push_back(s.basis(j) * w.density());
  // omega(b_i^* b_j) = Tr(b_j rho b_i^*) = <b_j rho, b_i>
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) g(i, j) = hs_inner(rb[static_cast<std::size_t>(j)], s.basis(i));
  return hermitian_part(g);
}

/// omega(x^* x) > 0 for every nonzero x in the span.
inline bool is_faithful_on(const PositiveFunctional& w, const OperatorSubspace& s) {
  if (s.dim() == 0) return true;
  return is_positive_definite(gns_gram(w, s));
}
inline bool is_faithful_on(const PositiveFunctional& w, const StarAlgebra& m) {
  return is_faithful_on(w, m.basis());
}

namespace detail {

/// T_ij = Tr([rho, a_i] b_j) = omega(a_i b_j) - omega(b_j a_i).
inline ComplexMatrix commutation_table(const ComplexMatrix& rho, const OperatorSubspace& a,
                                       const OperatorSubspace& b) {
  ComplexMatrix rows(a.dim(), rho.size());
  for (Index i = 0; i < a.dim(); ++i) rows.row(i) = trace_pairing_row(commutator(rho, a.basis(i)));
  return rows * b.columns();
}

}  // namespace detail

struct TracialCertificate {
  bool tracial = false;
  double max_violation = 0.0;  // max |omega(xy) - omega(yx)| over basis pairs
  double threshold = 0.0;
};

inline TracialCertificate tracial_certificate(const PositiveFunctional& w, const StarAlgebra& s) {
  TracialCertificate c;
  if (s.dim() > 0) c.max_violation = detail::commutation_table(w.density(), s.basis(), s.basis()).cwiseAbs().maxCoeff();
  c.threshold = tol(1e-9) * w.norm();
  c.tracial = c.max_violation <= c.threshold;
  return c;
}

/// M_omega: the commutant of the density of omega within M.
inline StarAlgebra centralizer(const PositiveFunctional& w, const StarAlgebra& m) {
  if (!is_faithful_on(w, m)) fail(ErrorCode::NotFaithful, "centralizer needs omega faithful on M");
  return commutant_of_set({m.project(w.density())}, m);
}

/// M^omega = {x in M : [x, e] = 0, omega(xy) = omega(yx) for y in M}, e the
/// support of omega on M. Works for non-faithful omega.
inline StarAlgebra omega_central_algebra(const PositiveFunctional& w, const StarAlgebra& m) {
  const Index n = m.ambient_dim();
  const ComplexMatrix rho = density_in(w, m);
  const ComplexMatrix e = spectral_projection_above(rho, pd_threshold(hermitian_spectrum(rho)));
  const Index k = m.dim();
  const double scale = std::max(op_norm(rho), 1e-300);
  ComplexMatrix l(n * n + k, k);
  for (Index c = 0; c < k; ++c) {
    const ComplexMatrix& x = m.basis().basis(c);
    l.block(0, c, n * n, 1) = vec(commutator(x, e));
    // omega(x y) - omega(y x) = Tr([rho, x] y)
    const ComplexMatrix cx = commutator(rho, x) / scale;
    for (Index r = 0; r < k; ++r) l(n * n + r, c) = (cx.transpose().cwiseProduct(m.basis().basis(r))).sum();
  }
  const ComplexMatrix ker = null_space(l);
  if (ker.cols() == 0) return StarAlgebra::trusted(OperatorSubspace(n), m.unit());
  return StarAlgebra::trusted(orthonormalize_columns(n, m.basis().columns() * ker), m.unit());
}

/// Distance between e M^omega e and the centralizer of omega on the corner eMe.
inline double centralizer_corner_deviation(const PositiveFunctional& w, const StarAlgebra& m) {
  const StarAlgebra mw = omega_central_algebra(w, m);
  const ComplexMatrix rho = density_in(w, m);
  const ComplexMatrix e = spectral_projection_above(rho, pd_threshold(hermitian_spectrum(rho)));
  const StarAlgebra emwe = corner(mw, e);
  const StarAlgebra eme = corner(m, e);
  const StarAlgebra cent = commutant_of_set({e * rho * e}, eme);
  return subspace_distance(emwe.basis(), cent.basis());
}

struct CentralityReport {
  bool central = false;
  double max_violation = 0.0;    // max |omega(dx) - omega(xd)| over basis pairs
  double commutator_norm = 0.0;  // max_d |P_M [rho, d]|_HS
  double threshold = 0.0;
};

/// D is omega-central: omega(dx) = omega(xd) for d in D, x in M. Both the
/// pairing table and the commutator norm are computed; they bound each other
/// by sqrt(dim M), and a violation of that bound is reported as an
/// inconsistency.
inline CentralityReport is_D_central(const PositiveFunctional& w, const StarAlgebra& d, const StarAlgebra& m) {
  CentralityReport r;
  const ComplexMatrix rho = density_in(w, m);
  r.threshold = tol(1e-9) * std::max(op_norm(rho), tol(tolerance::absolute));
  if (d.dim() == 0 || m.dim() == 0) {
    r.central = true;
    return r;
  }
  r.max_violation = detail::commutation_table(rho, d.basis(), m.basis()).cwiseAbs().maxCoeff();
  for (const auto& b : d.basis().basis())
    r.commutator_norm = std::max(r.commutator_norm, m.project(commutator(rho, b)).norm());
  r.central = r.max_violation <= r.threshold;
  const double slack = 1e-12 * std::max(1.0, op_norm(rho));
  if (r.max_violation > r.commutator_norm * (1.0 + 1e-9) + slack ||
      r.commutator_norm > std::sqrt(static_cast<double>(m.dim())) * r.max_violation * (1.0 + 1e-9) + slack) {
    std::ostringstream os;
    os << "pairing table " << r.max_violation << " vs commutator norm " << r.commutator_norm;
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  return r;
}

/// Projections in D: I, then the spectral projections of Hermitian elements
/// b + b^*, i(b - b^*) for each basis element b and of a fixed generic
/// combination, up to `cap` projections.
inline std::vector<ComplexMatrix> generating_projections(const StarAlgebra& d, std::size_t cap = 64) {
  const Index n = d.ambient_dim();
  std::vector<ComplexMatrix> out{d.unit()};
  std::vector<ComplexMatrix> herm;
  ComplexMatrix generic = ComplexMatrix::Zero(n, n);
  for (Index k = 0; k < d.dim(); ++k) {
    const ComplexMatrix& b = d.basis().basis(k);
    generic += (1.0 + 0.618 * static_cast<double>(k)) * (b + b.adjoint()) +
               (0.5 + 0.271 * static_cast<double>(k)) * Complex(0.0, 1.0) * (b - b.adjoint());
  }
  herm.push_back(generic);
  for (Index k = 0; k < d.dim(); ++k) {
    const ComplexMatrix& b = d.basis().basis(k);
    herm.push_back(b + b.adjoint());
    herm.push_back(Complex(0.0, 1.0) * (b - b.adjoint()));
  }
  for (const auto& h : herm) {
    if (out.size() >= cap) break;
    const HermitianSpectrum s = hermitian_spectrum(hermitian_part(h));
    const double gap = 1e-8 * std::max(1.0, s.spectral_norm());
    Index start = 0;
    for (Index i = 1; i <= n && out.size() < cap; ++i) {
      if (i == n || s.eigenvalues(i) - s.eigenvalues(i - 1) > gap) {
        if (i - start < n) {
          const auto v = s.eigenvectors.middleCols(start, i - start);
          out.push_back(v * v.adjoint());
        }
        start = i;
      }
    }
  }
  return out;
}

struct LocalCentralityReport {
  bool locally_central = false;
  bool globally_central = false;
  bool support_commutes = false;
  std::size_t projections_tested = 0;
  double max_violation = 0.0;  // max |omega(pxp dp) - omega(pdp xp)|
};

/// Tests omega(pxp d p) = omega(p d p x p) over a generating family of
/// projections p in D and basis d, x. The family contains I, so local and
/// global centrality must agree; central omega must also have support
/// commuting with D. Any mismatch throws InconsistencyDetected.
inline LocalCentralityReport locally_central_check(const PositiveFunctional& w, const StarAlgebra& d,
                                                   const StarAlgebra& m) {
  LocalCentralityReport r;
  const ComplexMatrix rho = density_in(w, m);
  const double thr = tol(1e-9) * std::max(op_norm(rho), tol(tolerance::absolute));
  const auto projections = generating_projections(d);
  r.projections_tested = projections.size();
  for (const auto& p : projections) {
    // omega(p x p d p) - omega(p d p x p) = Tr([p rho p, p d p] x) over x in M
    const ComplexMatrix prp = p * rho * p;
    ComplexMatrix rows(d.dim(), rho.size());
    for (Index i = 0; i < d.dim(); ++i) rows.row(i) = trace_pairing_row(commutator(p * d.basis().basis(i) * p, prp));
    if (d.dim() > 0 && m.dim() > 0) r.max_violation = std::max(r.max_violation, (rows * m.basis().columns()).cwiseAbs().maxCoeff());
  }
  r.locally_central = r.max_violation <= thr;
  const CentralityReport global = is_D_central(w, d, m);
  r.globally_central = global.central;
  const ComplexMatrix e = spectral_projection_above(rho, pd_threshold(hermitian_spectrum(rho)));
  double sc = 0.0;
  for (const auto& b : d.basis().basis()) sc = std::max(sc, commutator(e, b).norm());
  r.support_commutes = sc <= tol(1e-8);
  // Near the threshold the two decisions may straddle it; only a clear
  // disagreement is an inconsistency.
  const bool clear = std::abs(std::log10(std::max(global.max_violation, 1e-300) / thr)) > 1.0 &&
                     std::abs(std::log10(std::max(r.max_violation, 1e-300) / thr)) > 1.0;
  if (clear && r.locally_central != r.globally_central) {
    std::ostringstream os;
    os << "local violation " << r.max_violation << " vs global " << global.max_violation;
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  if (r.globally_central && global.max_violation < 0.1 * thr && !r.support_commutes) {
    std::ostringstream os;
    os << "central functional with support not commuting with D (" << sc << ")";
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  return r;
}

// ---------------------------------------------------------------------------
// modular theory

inline void require_faithful(const PositiveFunctional& w, const char* what) {
  if (!w.is_faithful()) {
    std::ostringstream os;
    os << what << ": density has min eigenvalue " << w.spectrum().min();
    fail(ErrorCode::NotFaithful, os.str());
  }
}

/// rho^{it} as a unitary.
inline ComplexMatrix density_power_it(const PositiveFunctional& w, double t) {
  require_faithful(w, "modular group");
  const auto& s = w.spectrum();
  ComplexVector ph(s.eigenvalues.size());
  for (Index i = 0; i < ph.size(); ++i) ph(i) = std::exp(Complex(0.0, t * std::log(s.eigenvalues(i))));
  return s.eigenvectors * ph.asDiagonal() * s.eigenvectors.adjoint();
}

/// sigma_t(x) = rho^{it} x rho^{-it} as a map on vec(x).
inline SuperOperator modular_group(const PositiveFunctional& w, double t) {
  const ComplexMatrix u = density_power_it(w, t);
  return sandwich_map(u, u.adjoint());
}

inline ComplexMatrix modular_apply(const PositiveFunctional& w, double t, const ComplexMatrix& x) {
  const ComplexMatrix u = density_power_it(w, t);
  return u * x * u.adjoint();
}

/// log rho, for faithful omega.
inline ComplexMatrix modular_generator(const PositiveFunctional& w) {
  require_faithful(w, "modular generator");
  const auto& s = w.spectrum();
  return hermitian_part(s.eigenvectors * s.eigenvalues.array().log().matrix().cast<Complex>().asDiagonal() *
                        s.eigenvectors.adjoint());
}

inline constexpr std::array<double, 3> modular_sample_times{0.1, 1.0, std::numbers::pi};

/// sigma_t(D) = D for all t, decided by [log rho, D] in D and cross-checked
/// against sigma_t(d) in D at a few times.
inline bool modular_invariance_check(const PositiveFunctional& w, const StarAlgebra& d) {
  const ComplexMatrix l = modular_generator(w);
  const double lscale = std::max(1.0, 2.0 * op_norm(l));
  double inf_res = 0.0;
  for (const auto& b : d.basis().basis()) inf_res = std::max(inf_res, d.basis().residual(commutator(l, b)) / lscale);
  double sample_res = 0.0;
  for (double t : modular_sample_times) {
    const ComplexMatrix u = density_power_it(w, t);
    for (const auto& b : d.basis().basis()) sample_res = std::max(sample_res, d.basis().residual(u * b * u.adjoint()));
  }
  const double thr = tol(1e-8);
  const bool inf = inf_res <= thr;
  const bool sampled = sample_res <= thr;
  if (inf != sampled && (inf_res > 10 * thr || inf_res < 0.1 * thr) && (sample_res > 10 * thr || sample_res < 0.1 * thr)) {
    std::ostringstream os;
    os << "generator residual " << inf_res << " vs sampled residual " << sample_res;
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  return inf;
}

inline bool densities_commute(const ComplexMatrix& a, const ComplexMatrix& b) {
  return commutator(a, b).norm() <= tol(1e-9) * std::max(1e-300, a.norm() * b.norm());
}

/// h = rho_psi rho_phi^{-1} when the densities commute, so that
/// psi(x) = phi(h^{1/2} x h^{1/2}).
inline ComplexMatrix pt_radon_nikodym(const PositiveFunctional& psi, const PositiveFunctional& phi) {
  require_faithful(phi, "Radon-Nikodym reference");
  if (psi.dim() != phi.dim()) fail(ErrorCode::DimensionMismatch, "Radon-Nikodym: dimensions differ");
  if (!densities_commute(psi.density(), phi.density())) {
    std::ostringstream os;
    os << "|[rho_psi, rho_phi]| = " << commutator(psi.density(), phi.density()).norm();
    fail(ErrorCode::DoesNotCommute, os.str());
  }
  const auto& s = phi.spectrum();
  const ComplexMatrix inv = s.eigenvectors * s.eigenvalues.cwiseInverse().cast<Complex>().asDiagonal() * s.eigenvectors.adjoint();
  const ComplexMatrix h = hermitian_part(psi.density() * inv);
  const ComplexMatrix hs = psd_sqrt(h);
  const double dev = (hs * phi.density() * hs - psi.density()).norm();
  if (dev > tol(1e-8) * std::max(1.0, psi.density().norm())) {
    std::ostringstream os;
    os << "phi(h^1/2 . h^1/2) misses psi by " << dev;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  return h;
}

/// phi_h(x) = phi(h^{1/2} x h^{1/2}).
inline PositiveFunctional weighted_functional(const PositiveFunctional& phi, const ComplexMatrix& h) {
  const ComplexMatrix hs = psd_sqrt(h);
  return PositiveFunctional::from_density(hs * phi.density() * hs);
}

/// u_t = rho_psi^{it} rho_phi^{-it}.
inline ComplexMatrix connes_cocycle(const PositiveFunctional& psi, const PositiveFunctional& phi, double t) {
  require_faithful(psi, "cocycle");
  require_faithful(phi, "cocycle");
  return density_power_it(psi, t) * density_power_it(phi, t).adjoint();
}

}  // namespace ncrep
