#pragma once

// Geometric means, tracial Hoelder, logmodular witnesses and the Jensen
// equality for representing expectations.

#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "ncrep/hoffman_rossi.hpp"

namespace ncrep {

namespace detail {

/// Weights w_i = <v_i, rho v_i> over right singular vectors of a and the
/// singular values, so that w(f(|a|)) = sum_i w_i f(s_i).
struct AbsSpectrum {
  RealVector weights;
  RealVector singular;  // ascending
};

inline AbsSpectrum abs_spectrum(const PositiveFunctional& w, const ComplexMatrix& a) {
  require_dim(a, w.dim(), "a");
  // SVD rather than eig(a^*a) so that small singular values keep full precision.
  Eigen::JacobiSVD<ComplexMatrix> svd(a, Eigen::ComputeFullV);
  const Index n = a.cols();
  AbsSpectrum out{RealVector(n), RealVector(n)};
  for (Index i = 0; i < n; ++i) {
    const Index k = n - 1 - i;
    out.singular(i) = svd.singularValues()(k);
    out.weights(i) = (svd.matrixV().col(k).adjoint() * w.density() * svd.matrixV().col(k))(0, 0).real();
  }
  return out;
}

/// w(|x|^p), p > 0, or the operator norm of x for p = inf.
inline double abs_power_moment(const PositiveFunctional& w, const ComplexMatrix& x, double p) {
  if (std::isinf(p)) return op_norm(x);
  const AbsSpectrum s = abs_spectrum(w, x);
  double m = 0.0;
  for (Index i = 0; i < s.singular.size(); ++i)
    if (s.singular(i) > 0.0) m += s.weights(i) * std::pow(s.singular(i), p);
  return m;
}

/// |x|_p = w(|x|^p)^{1/p}; |x|_inf = operator norm.
inline double abs_p_norm(const PositiveFunctional& w, const ComplexMatrix& x, double p) {
  if (std::isinf(p)) return op_norm(x);
  return std::pow(std::max(0.0, abs_power_moment(w, x, p)), 1.0 / p);
}

}  // namespace detail

/// Delta_w(a) = exp(w(log|a|)) with the power sequence w(|a|^{2^-k})^{2^k}.
struct GeometricMeanReport {
  ComplexMatrix element;
  double value = 0.0;
  std::vector<double> power_sequence;  // k = 0..N
  double max_increase = 0.0;           // largest relative step up, should be <= 1e-9
  double limit_gap = 0.0;              // |last - value| / value
  bool monotone() const { return max_increase <= tol(1e-9); }
  bool limit_ok() const { return limit_gap <= tol(1e-6); }
};

inline constexpr int geometric_mean_depth = 20;

/// Requires a invertible and w a state. Throws NotInvertible otherwise, and
/// InvariantViolation if the power sequence increases.
inline GeometricMeanReport geometric_mean(const PositiveFunctional& w, const ComplexMatrix& a,
                                          int depth = geometric_mean_depth) {
  if (!w.is_state()) fail(ErrorCode::NotNormalized, "geometric mean needs a state");
  require_finite(a, "a");
  const detail::AbsSpectrum s = detail::abs_spectrum(w, a);
  const double smax = s.singular.size() ? s.singular.maxCoeff() : 0.0;
  if (s.singular.size() == 0 || s.singular.minCoeff() <= tol(tolerance::pd) * std::max(smax, 1e-300)) {
    std::ostringstream os;
    os << "smallest singular value " << (s.singular.size() ? s.singular.minCoeff() : 0.0);
    fail(ErrorCode::NotInvertible, os.str());
  }
  const RealVector logs = s.singular.array().log();
  GeometricMeanReport r;
  r.element = a;
  r.value = std::exp(s.weights.dot(logs));
  // w(|a|^t) - 1 = sum_i w_i expm1(t log s_i) keeps precision as t -> 0.
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= depth; ++k) {
    const double t = std::ldexp(1.0, -k);
    double m1 = 0.0;
    for (Index i = 0; i < logs.size(); ++i) m1 += s.weights(i) * std::expm1(t * logs(i));
    m1 += s.weights.sum() - 1.0;
    const double v = std::exp(std::log1p(m1) / t);
    r.power_sequence.push_back(v);
    if (k > 0) r.max_increase = std::max(r.max_increase, (v - prev) / std::max(1.0, prev));
    prev = v;
  }
  r.limit_gap = std::abs(r.power_sequence.back() - r.value) / r.value;
  if (!r.monotone()) {
    std::ostringstream os;
    os << "power sequence increases by " << r.max_increase;
    fail(ErrorCode::InvariantViolation, os.str());
  }
  return r;
}

/// Delta_w(a), or 0 when a is singular (limit convention).
inline double geometric_mean_or_zero(const PositiveFunctional& w, const ComplexMatrix& a, bool* singular = nullptr) {
  try {
    const double v = geometric_mean(w, a).value;
    if (singular) *singular = false;
    return v;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotInvertible) throw;
    if (singular) *singular = true;
    return 0.0;
  }
}

struct SqrtIterationReport {
  std::vector<ComplexMatrix> iterates;
  double limit_deviation = 0.0;        // relative to the eigendecomposition sqrt
  double monotonicity_violation = 0.0; // max over k >= 2 of -lambda_min(x_k - x_{k+1})
};

/// x_1 = a, x_{k+1} = (x_k + a x_k^{-1}) / 2, decreasing to a^{1/2} from x_2 on.
inline SqrtIterationReport sqrt_iteration(const ComplexMatrix& a, int max_steps = 200) {
  require_square(a, "a");
  if (!is_hermitian(a) || !is_positive_definite(hermitian_part(a)))
    fail(ErrorCode::NotPositiveDefinite, "square-root iteration needs a positive definite matrix");
  const ComplexMatrix ah = hermitian_part(a);
  const double scale = op_norm(ah);
  SqrtIterationReport r;
  r.iterates.push_back(ah);
  for (int k = 0; k < max_steps; ++k) {
    const ComplexMatrix& x = r.iterates.back();
    const ComplexMatrix next = hermitian_part(0.5 * (x + ah * x.inverse()));
    const double step = (next - x).norm();
    r.iterates.push_back(next);
    if (step <= 1e-12 * scale) break;
  }
  for (std::size_t k = 1; k + 1 < r.iterates.size(); ++k) {
    const double lam = hermitian_spectrum(hermitian_part(r.iterates[k] - r.iterates[k + 1])).min();
    r.monotonicity_violation = std::max(r.monotonicity_violation, -lam);
  }
  const ComplexMatrix root = herm_funcalc(ah, ScalarFunction::sqrt());
  r.limit_deviation = (r.iterates.back() - root).norm() / root.norm();
  if (r.monotonicity_violation > tol(1e-10) * std::max(1.0, scale))
    fail(ErrorCode::InvariantViolation, "square-root iterates are not decreasing");
  if (r.limit_deviation > tol(1e-9)) fail(ErrorCode::InvariantViolation, "square-root iteration misses a^{1/2}");
  return r;
}

/// lambda_min(b + b^{-1} a - 2 a^{1/2}) for commuting positive invertible a, b.
inline double agm_margin(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (commutator(a, b).norm() > tol(1e-9) * std::max(1.0, a.norm() * b.norm()))
    fail(ErrorCode::DoesNotCommute, "a and b must commute");
  const ComplexMatrix x = hermitian_part(b + b.inverse() * a - 2.0 * herm_funcalc(hermitian_part(a), ScalarFunction::sqrt()));
  return hermitian_spectrum(x).min();
}

struct HolderReport {
  double lhs = 0.0;                 // |ab|_p
  double rhs = 0.0;                 // |a|_q |b|_r
  double symmetry_deviation = 0.0;  // max relative |w(|x|^p) - w(|x^*|^p)| over x in {a, b, ab}
  bool holds = false;
};

/// |ab|_p <= |a|_q |b|_r for a tracial state and 1/p = 1/q + 1/r (inf
/// exponents allowed, giving the operator norm).
inline HolderReport holder_tracial(const PositiveFunctional& w, const ComplexMatrix& a, const ComplexMatrix& b,
                                   double p, double q, double r) {
  const Index n = w.dim();
  require_dim(a, n, "a");
  require_dim(b, n, "b");
  if (!(p > 0 && q > 0 && r > 0)) fail(ErrorCode::InvariantViolation, "Hoelder exponents must be positive");
  auto inv = [](double x) { return std::isinf(x) ? 0.0 : 1.0 / x; };
  if (std::abs(inv(p) - inv(q) - inv(r)) > 1e-12 * std::max(1.0, inv(p)))
    fail(ErrorCode::InvariantViolation, "exponents must satisfy 1/p = 1/q + 1/r");
  const TracialCertificate tc = tracial_certificate(w, StarAlgebra::full(n));
  if (!tc.tracial) fail(ErrorCode::NotTracial, "Hoelder inequality needs a tracial state");
  HolderReport h;
  const ComplexMatrix ab = a * b;
  h.lhs = detail::abs_p_norm(w, ab, p);
  h.rhs = detail::abs_p_norm(w, a, q) * detail::abs_p_norm(w, b, r);
  const double scale = std::max(1.0, h.rhs);
  h.holds = h.lhs <= h.rhs + tol(1e-9) * scale;
  if (!std::isinf(p))
    for (const ComplexMatrix* x : {&a, &b, &ab}) {
      const double m = detail::abs_power_moment(w, *x, p);
      const double ms = detail::abs_power_moment(w, x->adjoint(), p);
      h.symmetry_deviation = std::max(h.symmetry_deviation, std::abs(m - ms) / std::max(1.0, std::abs(m)));
    }
  if (h.symmetry_deviation > tol(1e-9)) fail(ErrorCode::InconsistencyDetected, "w(|x|^p) differs from w(|x^*|^p)");
  return h;
}

/// Invertible a in A with a^*a = b, for A of block-triangular type.
inline ComplexMatrix logmodular_witness(const Subalgebra& alg, const ComplexMatrix& b) {
  const Index n = alg.ambient_dim();
  require_dim(b, n, "b");
  if (!alg.triangular()) fail(ErrorCode::NotTriangularType, "logmodular witnesses need a block-triangular algebra");
  if (!is_hermitian(b)) fail(ErrorCode::NotHermitian, "b must be Hermitian");
  const ComplexMatrix bh = hermitian_part(b);
  if (!is_positive_definite(bh)) fail(ErrorCode::NotBoundedBelow, "b is not bounded below");
  const auto& ts = *alg.triangular();
  // Reorder so that blocks are consecutive; upper triangular then lies in A.
  std::vector<Index> order;
  for (const auto& blk : ts.blocks)
    for (Index i : blk) order.push_back(i);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(n);
  for (Index k = 0; k < n; ++k) perm.indices()(k) = static_cast<int>(order[static_cast<std::size_t>(k)]);
  const ComplexMatrix bp = perm.transpose() * (ts.frame.adjoint() * bh * ts.frame) * perm;
  Eigen::LLT<ComplexMatrix> llt(hermitian_part(bp));
  if (llt.info() != Eigen::Success) fail(ErrorCode::NotBoundedBelow, "Cholesky factorization failed");
  const ComplexMatrix up = llt.matrixU();
  const ComplexMatrix a = ts.frame * (perm * up * perm.transpose()) * ts.frame.adjoint();
  const double dev = (a.adjoint() * a - bh).norm() / bh.norm();
  if (dev > tol(1e-9)) fail(ErrorCode::InvariantViolation, "witness does not reproduce b");
  if (alg.basis().residual(a) > tol(1e-8) * a.norm()) fail(ErrorCode::InvariantViolation, "witness is not in A");
  return a;
}

struct JensenReport {
  double delta_a = 0.0;
  double delta_phi = 0.0;
  bool phi_singular = false;      // Delta(Phi(a)) reported as 0 by convention
  bool a_singular = false;
  bool inequality_holds = false;  // Delta(Phi(a)) <= Delta(a) (1 + 1e-7)
  bool equality_checked = false;  // A logmodular-witnessed and Phi(a) invertible
  double equality_deviation = 0.0;
  bool equality_holds = false;
  bool ok() const { return inequality_holds && (!equality_checked || equality_holds); }
};

/// w tracial on D, psi a w-preserving expectation extending phi, a in A.
inline JensenReport jensen_check(const PositiveFunctional& w, const DCharacter& phi, const ConditionalExpectation& psi,
                                 const ComplexMatrix& a) {
  const StarAlgebra& d = phi.range();
  if (!tracial_certificate(w, d).tracial) fail(ErrorCode::NotTracial, "w must be tracial on D");
  if (preservation_deviation(psi, w) > tol(1e-8)) fail(ErrorCode::InvariantViolation, "psi is not w-preserving");
  if (extension_deviation(psi, phi) > tol(1e-7)) fail(ErrorCode::NotAnExtension, "psi does not extend Phi");
  if (phi.domain().basis().residual(a) > tol(1e-8) * std::max(1.0, a.norm()))
    fail(ErrorCode::InvariantViolation, "a is not in A");
  JensenReport r;
  r.delta_a = geometric_mean_or_zero(w, a, &r.a_singular);
  r.delta_phi = geometric_mean_or_zero(w, phi(a), &r.phi_singular);
  r.inequality_holds = r.delta_phi <= r.delta_a * (1.0 + tol(1e-7)) || (r.a_singular && r.phi_singular);
  if (!r.a_singular && !r.phi_singular && phi.domain().triangular()) {
    logmodular_witness(phi.domain(), hermitian_part(a.adjoint() * a));
    r.equality_checked = true;
    r.equality_deviation = std::abs(r.delta_a - r.delta_phi) / r.delta_a;
    r.equality_holds = r.equality_deviation <= tol(1e-6);
  }
  return r;
}

/// Random a in A: for triangular type, block-upper-triangular in the frame
/// with well-conditioned diagonal blocks; otherwise x + (|x| + 1/2) 1.
/// `singular_block` >= 0 makes that diagonal block rank deficient.
template <class Rng>
ComplexMatrix random_invertible_in(const Subalgebra& alg, Rng& rng, int singular_block = -1) {
  const Index n = alg.ambient_dim();
  if (!alg.triangular()) {
    const ComplexMatrix x = random_element(alg.basis(), rng);
    return x + (op_norm(x) + 0.5) * identity(n);
  }
  const auto& ts = *alg.triangular();
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> sv(0.5, 2.0);
  ComplexMatrix t = ComplexMatrix::Zero(n, n);
  for (std::size_t bi = 0; bi < ts.blocks.size(); ++bi) {
    const auto& rows = ts.blocks[bi];
    const Index k = static_cast<Index>(rows.size());
    auto random_unitary = [&] {
      ComplexMatrix z(k, k);
      for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < k; ++j) z(i, j) = Complex(gauss(rng), gauss(rng));
      Eigen::HouseholderQR<ComplexMatrix> qr(z);
      return ComplexMatrix(qr.householderQ());
    };
    RealVector s(k);
    for (Index i = 0; i < k; ++i) s(i) = sv(rng);
    if (static_cast<int>(bi) == singular_block) s(0) = 0.0;
    const ComplexMatrix blk = random_unitary() * s.cast<Complex>().asDiagonal() * random_unitary();
    for (Index i = 0; i < k; ++i)
      for (Index j = 0; j < k; ++j) t(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]) = blk(i, j);
    for (std::size_t bj = bi + 1; bj < ts.blocks.size(); ++bj)
      for (Index i : rows)
        for (Index j : ts.blocks[bj]) t(i, j) = Complex(gauss(rng), gauss(rng));
  }
  return ts.frame * t * ts.frame.adjoint();
}

struct JensenInstance {
  Subalgebra a;
  StarAlgebra d;
  DCharacter phi;
  PositiveFunctional w;
  ConditionalExpectation psi;
};

struct JensenSummary {
  std::size_t trials = 0;
  std::size_t inequality_passes = 0;
  std::size_t equality_checked = 0;
  std::size_t equality_passes = 0;
  std::size_t boundary_cases = 0;  // Phi(a) singular, inequality only
  std::size_t boundary_passes = 0;
  std::size_t near_misses = 0;     // equality deviation in (1e-9, 1e-6]
  double max_equality_deviation = 0.0;
  double max_inequality_excess = 0.0;  // max (Delta(Phi a) - Delta(a)) / Delta(a)
  std::size_t monotonicity_failures = 0;
  bool ok() const {
    return inequality_passes == trials && equality_passes == equality_checked && boundary_passes == boundary_cases &&
           monotonicity_failures == 0;
  }
};

/// Random invertible trials plus one singular-Phi(a) boundary case per five
/// trials when A has more than one diagonal block. Never throws on a failing
/// trial; failures are counted.
inline JensenSummary jensen_measure_suite(const JensenInstance& inst, std::size_t trials, std::uint64_t seed) {
  JensenSummary s;
  const std::size_t nblocks = inst.a.triangular() ? inst.a.triangular()->blocks.size() : 0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (t + 1)));
    ++s.trials;
    const ComplexMatrix a = random_invertible_in(inst.a, rng);
    try {
      const JensenReport r = jensen_check(inst.w, inst.phi, inst.psi, a);
      if (r.inequality_holds) ++s.inequality_passes;
      if (!r.phi_singular && r.delta_a > 0.0)
        s.max_inequality_excess = std::max(s.max_inequality_excess, (r.delta_phi - r.delta_a) / r.delta_a);
      if (r.equality_checked) {
        ++s.equality_checked;
        if (r.equality_holds) ++s.equality_passes;
        if (r.equality_deviation > 1e-9 && r.equality_deviation <= 1e-6) ++s.near_misses;
        s.max_equality_deviation = std::max(s.max_equality_deviation, r.equality_deviation);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvariantViolation) ++s.monotonicity_failures;
    }
    if (nblocks > 1 && t % 5 == 0) {
      ++s.boundary_cases;
      const ComplexMatrix b = random_invertible_in(inst.a, rng, static_cast<int>(t / 5 % nblocks));
      try {
        const JensenReport r = jensen_check(inst.w, inst.phi, inst.psi, b);
        if (r.phi_singular && r.inequality_holds) ++s.boundary_passes;
      } catch (const Error&) {
      }
    }
  }
  return s;
}

}  // namespace ncrep
