#pragma once

// Conditional expectations on M_n, stored as matrices acting on vec(x).

#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>

#include "ncrep/states.hpp"

namespace ncrep {

/// Residuals of the conditional-expectation axioms on probes.
struct ExpectationCheck {
  double unit_deviation = 0.0;        // |E(1) - unit of range|
  double idempotence_deviation = 0.0; // |E o E - E| / max(1, |E|)
  double positivity_margin = 0.0;     // min over probes of lambda_min(E(x^*x)) / |x|^2 (>= -1e-8 passes)
  double module_deviation = 0.0;      // max |E(dx) - dE(x)|, |E(xd) - E(x)d| / |x|
  double range_deviation = 0.0;       // |E(x) - P_range E(x)| / max(1, |E|)

  bool ok() const {
    return unit_deviation <= tol(1e-9) && idempotence_deviation <= tol(1e-9) && positivity_margin >= -tol(1e-8) &&
           module_deviation <= tol(1e-8) && range_deviation <= tol(1e-8);
  }

  std::string describe() const {
    std::ostringstream os;
    os << "unit " << unit_deviation << ", idempotence " << idempotence_deviation << ", positivity "
       << positivity_margin << ", module " << module_deviation << ", range " << range_deviation;
    return os.str();
  }
};

/// Support of a positive map on `domain`: the complement of the largest
/// projection p in the domain with T(p) = 0, read off the density of x ->
/// Tr T(x). Checks T(x) = T(zxz); with `idempotent_onto_subalgebra` also
/// checks z T(x) = T(x) z.
inline ComplexMatrix support_of_map(const SuperOperator& t, const StarAlgebra& domain,
                                    bool idempotent_onto_subalgebra = false) {
  const Index n = domain.ambient_dim();
  const Eigen::RowVectorXcd row = trace_pairing_row(identity(n)) * t;
  const ComplexMatrix dens = hermitian_part(domain.project(density_from_row(row, n)));
  const HermitianSpectrum s = hermitian_spectrum(dens);
  const ComplexMatrix z = spectral_projection_above(dens, pd_threshold(s));
  const double scale = std::max(1.0, t.norm());
  const double dev = (t - t * sandwich_map(z, z)).norm() / scale;
  if (dev > tol(1e-8)) {
    std::ostringstream os;
    os << "map does not factor through its support: " << dev;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  if (idempotent_onto_subalgebra) {
    const double c = (left_multiplication(z) * t - right_multiplication(z) * t).norm() / scale;
    if (c > tol(1e-8)) {
      std::ostringstream os;
      os << "support does not commute with the range: " << c;
      fail(ErrorCode::InvariantViolation, os.str());
    }
  }
  return z;
}

/// A linear map on M_n, regarded as a map from `domain` onto `range`.
class ConditionalExpectation {
 public:
  ConditionalExpectation(SuperOperator map, StarAlgebra domain, StarAlgebra range)
      : map_(std::move(map)), domain_(std::move(domain)), range_(std::move(range)) {
    support_ = support_of_map(map_, domain_);
  }

  Index ambient_dim() const { return domain_.ambient_dim(); }
  const SuperOperator& matrix() const { return map_; }
  const StarAlgebra& domain() const { return domain_; }
  const StarAlgebra& range() const { return range_; }
  const ComplexMatrix& support() const { return support_; }

  ComplexMatrix operator()(const ComplexMatrix& x) const {
    require_dim(x, ambient_dim(), "argument");
    return apply(map_, x);
  }

  ExpectationCheck check(std::uint64_t seed = 0x5eed, int probes = 4) const {
    ExpectationCheck c;
    const Index n = ambient_dim();
    const double scale = std::max(1.0, map_.norm());
    c.unit_deviation = ((*this)(identity(n)) - range_.unit()).norm();
    const SuperOperator pm = domain_.is_full() ? SuperOperator::Identity(n * n, n * n) : domain_.basis().projector();
    c.idempotence_deviation = (map_ * map_ * pm - map_ * pm).norm() / scale;
    c.range_deviation = (map_ - range_.basis().projector() * map_).norm() / scale;
    std::mt19937_64 rng(seed);
    c.positivity_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < probes; ++k) {
      const ComplexMatrix x = random_element(domain_.basis(), rng);
      const double x2 = x.squaredNorm();
      const ComplexMatrix ex = (*this)(x);
      const ComplexMatrix exx = (*this)(x.adjoint() * x);
      const double lam = Eigen::SelfAdjointEigenSolver<ComplexMatrix>(hermitian_part(exx), Eigen::EigenvaluesOnly)
                             .eigenvalues()(0);
      c.positivity_margin = std::min(c.positivity_margin, lam / x2);
      for (const auto& d : range_.basis().basis()) {
        const double l = ((*this)(d * x) - d * ex).norm();
        const double r = ((*this)(x * d) - ex * d).norm();
        c.module_deviation = std::max(c.module_deviation, std::max(l, r) / std::sqrt(x2));
      }
    }
    if (probes == 0) c.positivity_margin = 0.0;
    return c;
  }

  /// Throws InvariantViolation naming the failed axiom.
  void validate(std::uint64_t seed = 0x5eed) const {
    const ExpectationCheck c = check(seed);
    if (!c.ok()) fail(ErrorCode::InvariantViolation, "conditional expectation axioms: " + c.describe());
  }

 private:
  SuperOperator map_;
  StarAlgebra domain_;
  StarAlgebra range_;
  ComplexMatrix support_;
};

/// sup over unit x in M of |omega(E(x)) - omega(x)|.
inline double preservation_deviation(const ConditionalExpectation& e, const PositiveFunctional& w) {
  const Eigen::RowVectorXcd row = trace_pairing_row(w.density());
  const Eigen::RowVectorXcd diff = (row * e.matrix() - row) * e.domain().basis().columns();
  return diff.norm();
}

/// |E1 - E2| over the domain, as the HS -> HS operator norm.
inline double expectation_distance(const ConditionalExpectation& a, const ConditionalExpectation& b) {
  return op_norm((a.matrix() - b.matrix()) * a.domain().basis().columns());
}

namespace detail {

inline SuperOperator domain_projector(const StarAlgebra& m) {
  const Index n = m.ambient_dim();
  return m.is_full() ? SuperOperator::Identity(n * n, n * n) : m.basis().projector();
}

/// x -> sum_j c_j r_j with omega(r_i^* sum c_j r_j) = omega(r_i^* x): the
/// omega-orthogonal projection onto span(range). Coefficients solve the GNS
/// Gram system, by Cholesky when it is positive definite and by
/// pseudo-inverse otherwise.
inline SuperOperator gram_projection_map(const ComplexMatrix& rho, const OperatorSubspace& range, bool pseudo = false) {
  const Index n = range.ambient_dim();
  const Index k = range.dim();
  const PositiveFunctional w = PositiveFunctional::from_density(rho);
  const ComplexMatrix g = gns_gram(w, range);
  ComplexMatrix v(k, n * n);
  for (Index i = 0; i < k; ++i) v.row(i) = trace_pairing_row(rho * range.basis(i).adjoint());
  ComplexMatrix coeff;
  if (pseudo) {
    coeff = psd_pseudo_power(g, -1.0) * v;
  } else {
    coeff = g.llt().solve(v);
  }
  return range.columns() * coeff;
}

}  // namespace detail

/// The GNS Gram projection onto D composed with P_M. It is the only
/// candidate for an omega-preserving expectation when omega is faithful on D.
inline SuperOperator gram_expectation_map(const PositiveFunctional& w, const StarAlgebra& d, const StarAlgebra& m) {
  const ComplexMatrix g = gns_gram(w, d.basis());
  if (!is_positive_definite(g)) {
    std::ostringstream os;
    os << "GNS Gram matrix of D is singular (min eigenvalue " << hermitian_spectrum(g).min() << ")";
    fail(ErrorCode::GramSingular, os.str());
  }
  return detail::gram_projection_map(w.density(), d.basis()) * detail::domain_projector(m);
}

/// iota_D o E_0 o Q: compress to the support z of omega, project onto Dz in
/// zMz, then lift back to D through d z -> d.
inline SuperOperator compressed_expectation_map(const PositiveFunctional& w, const StarAlgebra& d, const StarAlgebra& m) {
  const Index n = m.ambient_dim();
  const ComplexMatrix rho = density_in(w, m);
  const ComplexMatrix z = spectral_projection_above(rho, pd_threshold(hermitian_spectrum(rho)));
  std::vector<ComplexMatrix> dz;
  for (const auto& b : d.basis().basis()) dz.push_back(b * z);
  const OperatorSubspace dzs = orthonormalize(dz);
  const SuperOperator e0 = detail::gram_projection_map(w.density(), dzs) * sandwich_map(z, z);
  ComplexMatrix lift(n * n, d.dim());
  for (Index i = 0; i < d.dim(); ++i) lift.col(i) = vec(d.basis().basis(i) * z);
  Eigen::CompleteOrthogonalDecomposition<ComplexMatrix> cod(lift);
  cod.setThreshold(tol(tolerance::rank));
  const ComplexMatrix iota = d.basis().columns() * cod.pseudoInverse();
  return iota * e0 * detail::domain_projector(m);
}

/// The omega-preserving conditional expectation of M onto D. Requires D
/// omega-central and omega faithful on D.
inline ConditionalExpectation preserving_expectation(const PositiveFunctional& w, const StarAlgebra& d,
                                                     const StarAlgebra& m) {
  const CentralityReport c = is_D_central(w, d, m);
  if (!c.central) {
    std::ostringstream os;
    os << "max |omega(dx) - omega(xd)| = " << c.max_violation << " > " << c.threshold;
    fail(ErrorCode::NotDCentral, os.str());
  }
  SuperOperator t = gram_expectation_map(w, d, m);
  if (!is_faithful_on(w, m)) {
    const SuperOperator t2 = compressed_expectation_map(w, d, m);
    const double dev = (t - t2).norm() / std::max(1.0, t.norm());
    if (dev > tol(1e-8)) {
      std::ostringstream os;
      os << "Gram and compression constructions differ by " << dev;
      fail(ErrorCode::InconsistencyDetected, os.str());
    }
  }
  ConditionalExpectation e(std::move(t), m, d);
  e.validate();
  const double pres = preservation_deviation(e, w);
  if (pres > tol(1e-9) * std::max(1.0, w.norm())) {
    std::ostringstream os;
    os << "omega o E differs from omega by " << pres;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  return e;
}

/// omega-preserving expectation onto a sigma^omega-invariant subalgebra N of
/// M, for faithful omega. N need not lie in the centralizer.
inline ConditionalExpectation takesaki_expectation(const PositiveFunctional& w, const StarAlgebra& nalg,
                                                   const StarAlgebra& m) {
  const PositiveFunctional wm = restrict_to(w, m);
  if (!is_faithful_on(w, m)) fail(ErrorCode::NotFaithful, "invariant-subalgebra expectation needs faithful omega");
  if (m.is_full() && !modular_invariance_check(wm, nalg)) {
    fail(ErrorCode::NotDCentral, "subalgebra is not invariant under the modular group");
  }
  ConditionalExpectation e(gram_expectation_map(w, nalg, m), m, nalg);
  e.validate();
  return e;
}

// ---------------------------------------------------------------------------
// densities and modular commutation

struct ModularCommutation {
  bool commutes = false;
  double functional_deviation = 0.0;   // nu o E o sigma_t vs nu o E
  double map_deviation = 0.0;          // E o sigma_t vs sigma_t o E
  double generator_deviation = 0.0;    // [ad log rho, E]
};

inline constexpr std::array<double, 3> commutation_times{0.1, 1.0, std::numbers::sqrt2};

/// E commutes with nu, tested three ways: nu o E is sigma^nu-invariant, E
/// commutes with sigma^nu_t, and E commutes with ad(log rho_nu). Clear
/// disagreement throws InconsistencyDetected.
inline ModularCommutation commutes_with_modular(const ConditionalExpectation& e, const PositiveFunctional& nu) {
  require_faithful(nu, "modular commutation");
  ModularCommutation r;
  const SuperOperator& t = e.matrix();
  const double scale = std::max(1.0, t.norm());
  const Eigen::RowVectorXcd ne = trace_pairing_row(nu.density()) * t;
  for (double s : commutation_times) {
    const SuperOperator sig = modular_group(nu, s);
    r.functional_deviation = std::max(r.functional_deviation, (ne * sig - ne).norm() / std::max(1.0, ne.norm()));
    r.map_deviation = std::max(r.map_deviation, (t * sig - sig * t).norm() / scale);
  }
  const SuperOperator ad = commutator_map(modular_generator(nu));
  r.generator_deviation = (ad * t - t * ad).norm() / (scale * std::max(1.0, ad.norm()));
  const double thr = tol(1e-8);
  const bool a = r.functional_deviation <= thr, b = r.map_deviation <= thr, c = r.generator_deviation <= thr;
  auto clear = [thr](double v) { return v > 100 * thr || v < 0.01 * thr; };
  if ((a != b || b != c) && clear(r.functional_deviation) && clear(r.map_deviation) && clear(r.generator_deviation)) {
    std::ostringstream os;
    os << "modular commutation tests disagree: functional " << r.functional_deviation << ", map "
       << r.map_deviation << ", generator " << r.generator_deviation;
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  r.commutes = a && b && c;
  return r;
}

/// Density of nu o E as an element of M.
inline PositiveFunctional compose(const PositiveFunctional& nu, const ConditionalExpectation& e) {
  const Index n = e.ambient_dim();
  const Eigen::RowVectorXcd row = trace_pairing_row(nu.density()) * e.matrix();
  return PositiveFunctional::from_density(hermitian_part(e.domain().project(density_from_row(row, n))));
}

/// E(x) = E_D(h^{1/2} x h^{1/2}) with E_D the nu-preserving expectation.
inline ConditionalExpectation expectation_from_density(const ComplexMatrix& h, const StarAlgebra& d,
                                                       const StarAlgebra& m, const PositiveFunctional& nu) {
  const Index n = m.ambient_dim();
  require_dim(h, n, "density h");
  if (!is_positive_semidefinite(h)) fail(ErrorCode::NotPositiveDefinite, "h must be positive");
  if (!m.contains(h)) fail(ErrorCode::InvariantViolation, "h must lie in M");
  const double hs = std::max(1.0, h.norm());
  for (const auto& b : d.basis().basis())
    if (commutator(h, b).norm() > tol(1e-9) * hs) {
      std::ostringstream os;
      os << "|[h, d]| = " << commutator(h, b).norm();
      fail(ErrorCode::DensityDoesNotCommute, os.str());
    }
  if (commutator(h, nu.density()).norm() > tol(1e-9) * hs * std::max(1.0, nu.density().norm())) {
    std::ostringstream os;
    os << "|[h, rho_nu]| = " << commutator(h, nu.density()).norm();
    fail(ErrorCode::DensityDoesNotCommute, os.str());
  }
  const ConditionalExpectation ed = preserving_expectation(nu, d, m);
  const double norm_dev = (ed(h) - identity(n)).norm();
  if (norm_dev > tol(1e-8) * hs) {
    std::ostringstream os;
    os << "|E_D(h) - 1| = " << norm_dev;
    fail(ErrorCode::NotNormalized, os.str());
  }
  const ComplexMatrix r = psd_sqrt(h);
  ConditionalExpectation e(ed.matrix() * sandwich_map(r, r), m, d);
  e.validate();
  const PositiveFunctional nh = weighted_functional(nu, h);
  const double dev = (compose(nu, e).density() - hermitian_part(m.project(nh.density()))).norm();
  if (dev > tol(1e-9) * std::max(1.0, nh.density().norm())) {
    std::ostringstream os;
    os << "nu o E differs from nu_h by " << dev;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  return e;
}

/// h = d(nu o E)/d nu, defined when E commutes with nu.
inline ComplexMatrix expectation_to_density(const ConditionalExpectation& e, const PositiveFunctional& nu) {
  const ModularCommutation mc = commutes_with_modular(e, nu);
  if (!mc.commutes) {
    std::ostringstream os;
    os << "expectation does not commute with the modular group (" << mc.map_deviation << ")";
    fail(ErrorCode::DoesNotCommute, os.str());
  }
  return pt_radon_nikodym(compose(nu, e), nu);
}

// ---------------------------------------------------------------------------
// averaging and supports

/// rho = psi o E_{D' cap M}, with E_{D' cap M} the omega-preserving
/// expectation onto the relative commutant. Requires D in the centralizer
/// of omega and psi = omega on D.
inline PositiveFunctional average_to_central(const PositiveFunctional& psi, const PositiveFunctional& w,
                                             const StarAlgebra& d, const StarAlgebra& m) {
  const CentralityReport c = is_D_central(w, d, m);
  if (!c.central) {
    std::ostringstream os;
    os << "D is not in the centralizer of omega (" << c.max_violation << ")";
    fail(ErrorCode::NotCentral, os.str());
  }
  double ext = 0.0;
  for (const auto& b : d.basis().basis()) ext = std::max(ext, std::abs(psi(b) - w(b)));
  if (ext > tol(1e-8) * std::max(1.0, w.norm())) {
    std::ostringstream os;
    os << "psi differs from omega on D by " << ext;
    fail(ErrorCode::NotAnExtension, os.str());
  }
  const StarAlgebra rel = commutant(d, m);
  const ConditionalExpectation e = takesaki_expectation(w, rel, m);
  const PositiveFunctional rho = compose(psi, e);
  double ext2 = 0.0;
  for (const auto& b : d.basis().basis()) ext2 = std::max(ext2, std::abs(rho(b) - w(b)));
  if (ext2 > tol(1e-8) * std::max(1.0, w.norm()))
    fail(ErrorCode::InvariantViolation, "averaged functional no longer extends omega on D");
  if (!is_D_central(rho, d, m).central) fail(ErrorCode::InvariantViolation, "averaged functional is not D-central");
  if (densities_commute(psi.density(), w.density()) && !densities_commute(rho.density(), w.density()))
    fail(ErrorCode::InvariantViolation, "averaging broke commutation with omega");
  return rho;
}

/// E(x) = F(zxz) onto Dz, with z the support of omega on D and F the
/// omega-preserving expectation of zMz onto Dz. Cross-checked against the
/// pseudo-inverse Gram construction on D followed by d -> dz.
inline ConditionalExpectation support_ideal_expectation(const PositiveFunctional& w, const StarAlgebra& d,
                                                        const StarAlgebra& m) {
  const Index n = m.ambient_dim();
  const CentralityReport c = is_D_central(w, d, m);
  if (!c.central) {
    std::ostringstream os;
    os << "max |omega(dx) - omega(xd)| = " << c.max_violation;
    fail(ErrorCode::NotDCentral, os.str());
  }
  const ComplexMatrix rd = density_in(w, d);
  const ComplexMatrix z = spectral_projection_above(rd, pd_threshold(hermitian_spectrum(rd)));
  for (const auto& b : d.basis().basis())
    if (commutator(z, b).norm() > tol(1e-9)) {
      std::ostringstream os;
      os << "support of omega on D is not central in D (" << commutator(z, b).norm() << ")";
      fail(ErrorCode::SupportNotCentral, os.str());
    }
  const StarAlgebra dz = corner(d, z);
  const SuperOperator pm = detail::domain_projector(m);
  const SuperOperator t = detail::gram_projection_map(w.density(), dz.basis()) * sandwich_map(z, z) * pm;
  const SuperOperator t2 =
      right_multiplication(z) * detail::gram_projection_map(w.density(), d.basis(), true) * pm;
  const double dev = (t - t2).norm() / std::max(1.0, t.norm());
  if (dev > tol(1e-8)) {
    std::ostringstream os;
    os << "supported expectation is not unique: constructions differ by " << dev;
    fail(ErrorCode::InconsistencyDetected, os.str());
  }
  ConditionalExpectation e(t, m, dz);
  e.validate();
  if (preservation_deviation(e, w) > tol(1e-9) * std::max(1.0, w.norm()))
    fail(ErrorCode::InvariantViolation, "supported expectation does not preserve omega");
  (void)n;
  return e;
}

// ---------------------------------------------------------------------------
// diagnosis

/// The equivalence table for a pair (omega, D). Condition (1): an
/// omega-preserving expectation onto D exists; (2): D omega-central with
/// omega faithful on D; (3): D locally omega-central with omega a faithful
/// trace on D and support commuting with D. The three are equivalent when
/// omega is faithful and tracial on D; `consistent` records that.
struct DiagnosisReport {
  bool faithful_on_D = false;
  bool tracial_on_D = false;
  bool central = false;
  bool locally_central = false;
  bool support_commutes = false;
  std::optional<bool> modular_invariant;
  bool expectation_exists = false;
  bool supported_expectation_exists = false;
  bool condition1 = false;
  bool condition2 = false;
  bool condition3 = false;
  bool consistent = true;
  double centrality_violation = 0.0;
  std::string reason;
  std::optional<ConditionalExpectation> expectation;
};

inline DiagnosisReport existence_diagnosis(const PositiveFunctional& w, const StarAlgebra& d, const StarAlgebra& m) {
  DiagnosisReport r;
  r.faithful_on_D = is_faithful_on(w, d);
  r.tracial_on_D = tracial_certificate(w, d).tracial;
  try {
    const CentralityReport c = is_D_central(w, d, m);
    r.central = c.central;
    r.centrality_violation = c.max_violation;
    const LocalCentralityReport lc = locally_central_check(w, d, m);
    r.locally_central = lc.locally_central;
    r.support_commutes = lc.support_commutes;
  } catch (const Error& e) {
    r.consistent = false;
    r.reason = e.what();
  }
  if (w.is_faithful() && m.is_full()) {
    try {
      r.modular_invariant = modular_invariance_check(w, d);
    } catch (const Error& e) {
      r.consistent = false;
      r.reason = e.what();
    }
  }
  // Condition (1) does not consult the centrality test: the Gram projection
  // is the only possible omega-preserving expectation, so it is built and
  // validated directly.
  if (r.faithful_on_D) {
    try {
      ConditionalExpectation e(gram_expectation_map(w, d, m), m, d);
      const bool valid = e.check().ok() && preservation_deviation(e, w) <= tol(1e-9) * std::max(1.0, w.norm());
      r.expectation_exists = valid;
      if (valid) r.expectation = e;
    } catch (const Error&) {
      r.expectation_exists = false;
    }
  }
  if (r.central) {
    try {
      support_ideal_expectation(w, d, m);
      r.supported_expectation_exists = true;
    } catch (const Error&) {
      r.supported_expectation_exists = false;
    }
  }
  r.condition1 = r.faithful_on_D && r.tracial_on_D && r.expectation_exists;
  r.condition2 = r.faithful_on_D && r.central;
  r.condition3 = r.faithful_on_D && r.tracial_on_D && r.locally_central && r.support_commutes;
  if (r.faithful_on_D && r.tracial_on_D && (r.condition1 != r.condition2 || r.condition2 != r.condition3)) {
    r.consistent = false;
    if (r.reason.empty()) r.reason = "existence conditions disagree";
  }
  if (r.reason.empty()) {
    if (!r.faithful_on_D)
      r.reason = r.supported_expectation_exists ? "omega not faithful on D: supported expectation onto an ideal of D"
                                                : "omega not faithful on D";
    else if (!r.central)
      r.reason = "no expectation: D not omega-central";
    else
      r.reason = "omega-preserving expectation exists";
  }
  return r;
}

}  // namespace ncrep
