#pragma once

// Randomized verification suites with per-assertion reports.

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ncrep/instance.hpp"
#include "ncrep/jensen.hpp"
#include "ncrep/random.hpp"

namespace ncrep {

/// One named assertion aggregated over trials.
struct Assertion {
  std::string name;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  bool informational = false;  // recorded, never fails
  bool pass() const { return informational || failures == 0; }
};

class Report {
 public:
  /// Passes when deviation <= tolerance (NaN fails).
  bool record(const std::string& name, double deviation, double tolerance) {
    Assertion& a = slot(name, tolerance);
    ++a.checks;
    const bool ok = deviation <= tolerance;
    if (!(deviation <= a.max_deviation)) a.max_deviation = deviation;
    if (!ok) ++a.failures;
    return ok;
  }
  bool record_bool(const std::string& name, bool ok) { return record(name, ok ? 0.0 : 1.0, 0.5); }
  void note(const std::string& name, double value) {
    Assertion& a = slot(name, std::numeric_limits<double>::infinity());
    a.informational = true;
    ++a.checks;
    a.max_deviation = std::max(a.max_deviation, value);
  }
  /// An exception inside a trial counts as a failure of `name`.
  void error(const std::string& name, const std::string& what) {
    Assertion& a = slot(name, 0.0);
    ++a.checks;
    ++a.failures;
    if (errors_.size() < 32) errors_.push_back(name + ": " + what);
  }
  void add_failing_instance(Json j) {
    if (failing_.size() < 16) failing_.push_back(std::move(j));
  }

  bool ok() const {
    for (const auto& a : assertions_)
      if (!a.pass()) return false;
    return true;
  }
  const std::vector<Assertion>& assertions() const { return assertions_; }
  const std::vector<std::string>& errors() const { return errors_; }
  const std::vector<Json>& failing_instances() const { return failing_; }

  Json to_json() const {
    Json as = Json::array();
    for (const auto& a : assertions_) {
      Json o{{"name", a.name},
             {"max_deviation", a.max_deviation},
             {"tolerance", a.informational ? Json(nullptr) : Json(a.tolerance)},
             {"checks", a.checks},
             {"failures", a.failures},
             {"pass", a.pass()}};
      if (a.informational) o["informational"] = true;
      as.push_back(std::move(o));
    }
    return Json{{"pass", ok()}, {"assertions", as}, {"errors", errors_}, {"failing_instances", failing_}};
  }

 private:
  Assertion& slot(const std::string& name, double tolerance) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      index_[name] = assertions_.size();
      assertions_.push_back(Assertion{name, tolerance});
      return assertions_.back();
    }
    return assertions_[it->second];
  }

  std::vector<Assertion> assertions_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> errors_;
  std::vector<Json> failing_;
};

struct SuiteOptions {
  std::string suite = "all";
  Index n_max = 4;
  std::size_t trials = 50;
  std::uint64_t seed = 42;
  bool inject_fault = false;  // corrupts one constructed map per trial
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"expectations", "hoffman-rossi", "jensen", "diagnosis", "all"};
  return names;
}

namespace detail {

inline Index trial_dimension(Rng& rng, Index n_min, Index n_max) {
  return std::uniform_int_distribution<Index>(n_min, std::max(n_min, n_max))(rng);
}

/// Perturbs a map by 1e-3 in a fixed direction.
inline SuperOperator corrupt(const SuperOperator& t) {
  SuperOperator c = t;
  c(0, c.cols() - 1) += 1e-3;
  return c;
}

/// Trace norm of a Hermitian matrix: the norm of the difference functional.
inline double trace_norm(const ComplexMatrix& x) {
  return hermitian_spectrum(hermitian_part(x)).eigenvalues.cwiseAbs().sum();
}

inline void record_expectation_axioms(Report& rep, const std::string& prefix, const ConditionalExpectation& e) {
  const ExpectationCheck c = e.check();
  rep.record(prefix + ".unit", c.unit_deviation, tol(1e-9));
  rep.record(prefix + ".idempotence", c.idempotence_deviation, tol(1e-9));
  rep.record(prefix + ".positivity", -c.positivity_margin, tol(1e-8));
  rep.record(prefix + ".bimodule", c.module_deviation, tol(1e-8));
  rep.record(prefix + ".range", c.range_deviation, tol(1e-8));
}

inline void expectations_trial(Report& rep, const SuiteOptions& opt, std::size_t t) {
  Rng rng = trial_rng(opt.seed, 4 * t);
  const Index n = trial_dimension(rng, 2, opt.n_max);
  const StarAlgebra m = StarAlgebra::full(n);
  try {
    const StarAlgebra d = random_subalgebra_of(m, rng);
    const PositiveFunctional w = random_central_state(d, m, rng);
    ConditionalExpectation e = preserving_expectation(w, d, m);
    if (opt.inject_fault) e = ConditionalExpectation(corrupt(e.matrix()), m, d);
    record_expectation_axioms(rep, "expectation", e);
    rep.record("expectation.preservation", preservation_deviation(e, w), tol(1e-9));
    const ModularCommutation mc = commutes_with_modular(e, w);
    rep.record("expectation.modular_commutation", std::max(mc.map_deviation, mc.functional_deviation), tol(1e-8));
  } catch (const Error& err) {
    rep.error("expectation.construction", err.what());
  }
  try {
    Rng r2 = trial_rng(opt.seed, 4 * t + 1);
    const BijectionTriple bt = random_bijection_triple(n, r2);
    const ConditionalExpectation e = expectation_from_density(bt.h, bt.d, bt.m, bt.tau);
    const ComplexMatrix h2 = expectation_to_density(e, bt.tau);
    rep.record("bijection.roundtrip", (h2 - bt.h).norm() / bt.h.norm(), tol(1e-8));
    const PositiveFunctional nh = weighted_functional(bt.tau, bt.h);
    rep.record("bijection.nu_h", trace_norm(compose(bt.tau, e).density() - nh.density()), tol(1e-9));
  } catch (const Error& err) {
    rep.error("bijection.construction", err.what());
  }
  try {
    Rng r3 = trial_rng(opt.seed, 4 * t + 2);
    const StarAlgebra d = multiplicity_algebra(random_multiplicity_structure(n, r3), random_unitary(n, r3));
    const PositiveFunctional w = random_central_state(d, m, r3);
    // psi = omega + eps H with H Hermitian, HS-orthogonal to D, so psi = omega
    // on D; H drawn from the commutant of rho_omega on even trials.
    const bool commuting = t % 2 == 0;
    const OperatorSubspace pool = commuting ? commutant_of_set({w.density()}, m).basis() : m.basis();
    const ComplexMatrix cons = d.basis().columns().adjoint() * pool.columns();
    const ComplexMatrix ker = null_space(cons);
    if (ker.cols() > 0) {
      const ComplexMatrix h = hermitian_part(pool.from_coordinates(ker * random_gaussian(ker.cols(), 1, r3)));
      if (h.norm() > 1e-6) {
        const double eps = 0.5 * hermitian_spectrum(w.density()).min() / op_norm(h);
        const PositiveFunctional psi = PositiveFunctional::from_density(hermitian_part(w.density() + eps * h));
        const PositiveFunctional rho = average_to_central(psi, w, d, m);
        double ext = 0.0;
        for (const auto& b : d.basis().basis()) ext = std::max(ext, std::abs(rho(b) - w(b)));
        rep.record("averaging.extends", ext, tol(1e-9));
        rep.record("averaging.central", is_D_central(rho, d, m).commutator_norm, tol(1e-9));
        if (densities_commute(psi.density(), w.density()))
          rep.record("averaging.commutes", commutator(rho.density(), w.density()).norm(), tol(1e-9));
      }
    }
  } catch (const Error& err) {
    rep.error("averaging.construction", err.what());
  }
  try {
    Rng r4 = trial_rng(opt.seed, 4 * t + 3);
    const Index k = std::min<Index>(n, 6);
    const StarAlgebra a = random_structured_algebra(k, r4);
    const StarAlgebra full = StarAlgebra::full(k);
    const StarAlgebra bic = commutant(commutant(a, full), full);
    rep.record("algebra.bicommutant", subspace_distance(bic.basis(), a.basis()), tol(1e-8));
    const PositiveFunctional w = random_state_in(a, r4);
    rep.record("algebra.centralizer_corner", centralizer_corner_deviation(w, a), tol(1e-8));
  } catch (const Error& err) {
    rep.error("algebra.construction", err.what());
  }
}

/// Perturbation of r by an element of M annihilating A under the trace pairing.
inline ComplexMatrix annihilator_perturbation(const StarAlgebra& m, const Subalgebra& a, const ComplexMatrix& weight,
                                             Rng& rng, double scale) {
  const Index n = m.ambient_dim();
  // Tr(weight y x) = 0 for x in A: y^* weight^* ... solve in M coordinates
  ComplexMatrix s(a.dim(), m.dim());
  for (Index j = 0; j < a.dim(); ++j) {
    const ComplexMatrix xw = a.basis().basis(j) * weight;
    for (Index i = 0; i < m.dim(); ++i) s(j, i) = (m.basis().basis(i).transpose().cwiseProduct(xw)).sum();
  }
  const ComplexMatrix ker = null_space(s);
  if (ker.cols() == 0) return ComplexMatrix::Zero(n, n);
  std::normal_distribution<double> g;
  ComplexVector c(ker.cols());
  for (Index i = 0; i < c.size(); ++i) c(i) = Complex(g(rng), g(rng));
  ComplexMatrix y = m.basis().from_coordinates(ker * c);
  return scale * y / y.norm();
}

inline void hoffman_rossi_trial(Report& rep, const SuiteOptions& opt, std::size_t t) {
  Rng rng = trial_rng(opt.seed, 4 * t);
  const Index n = trial_dimension(rng, 2, opt.n_max);
  const StarAlgebra m = StarAlgebra::full(n);
  const PositiveFunctional tau = PositiveFunctional::tracial(n);
  const Partition p = random_partition(n, rng);
  const ComplexMatrix u = random_unitary(n, rng);
  const BlockCharacter bc = make_block_character(n, p, u);
  auto failing = [&](const std::optional<ComplexMatrix>& density) {
    rep.add_failing_instance(serialize_instance(block_instance_spec(n, p, u, density)));
  };
  try {
    RepresentingMeasure rm = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi);
    if (opt.inject_fault) rm.psi = ConditionalExpectation(corrupt(rm.psi.matrix()), m, bc.d);
    bool ok = rep.record("hr.extension", extension_deviation(rm.psi, bc.phi), tol(1e-7));
    ok &= rep.record("hr.preservation", preservation_deviation(rm.psi, rm.rho), tol(1e-8));
    ok &= rep.record("hr.restriction", rm.restriction_deviation, tol(1e-8));
    ok &= rep.record("hr.kernel_annihilation", rm.kernel_annihilation, tol(1e-8));
    ok &= rep.record("hr.normalization", rm.normalization_deviation, tol(1e-7));
    record_expectation_axioms(rep, "hr.psi", rm.psi);
    const SuperOperator other = gram_expectation_map(rm.rho, bc.d, m);
    ok &= rep.record("hr.uniqueness", op_norm(rm.psi.matrix() - other), tol(1e-7));
    // tau(f)^2 <= |a|_2^2 tau(f^2 g) for f in D_+
    double excess = 0.0;
    for (int k = 0; k < 3; ++k) {
      const ComplexMatrix x = random_element(bc.d.basis(), rng);
      const ComplexMatrix f = hermitian_part(x.adjoint() * x);
      const double lhs = std::pow(tau(f).real(), 2);
      const double rhs = rm.a_norm2 * tau(f * f * rm.g).real();
      excess = std::max(excess, (lhs - rhs) / std::max(1.0, rhs));
    }
    ok &= rep.record("hr.mth_inequality", excess, tol(1e-9));
    const auto [mu, gg] = pipeline_measure_space(rm, tau);
    const MthReport mr = mth_check(mu, gg);
    ok &= rep.record("hr.mth_criterion", mr.inverse_integral - 1.0, tol(1e-9));
    rep.note("hr.g_condition", rm.g_condition);

    const RepresentingMeasure rs = representing_expectation_state(m, tau, bc.d, bc.a, bc.phi);
    ok &= rep.record("hr.cross_pipeline", op_norm(rm.psi.matrix() - rs.psi.matrix()), tol(1e-7));

    PipelineOptions po;
    po.r_override = rm.r + annihilator_perturbation(m, bc.a, density_in(tau, m), rng, 0.3 * rm.r.norm());
    const RepresentingMeasure rp = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi, po);
    const auto [mu2, g2] = pipeline_measure_space(rp, tau);
    ok &= rep.record("hr.mth_criterion", mth_check(mu2, g2).inverse_integral - 1.0, tol(1e-9));
    ok &= rep.record("hr.perturbed_r", op_norm(rm.psi.matrix() - rp.psi.matrix()), tol(1e-7));
    rep.note("hr.omega_shift_under_r", trace_norm(rm.omega.density() - rp.omega.density()));
    rep.note("hr.rho_shift_under_r", trace_norm(rm.rho.density() - rp.rho.density()));
    if (!ok) failing(std::nullopt);
  } catch (const Error& err) {
    rep.error(err.code() == ErrorCode::GSingular ? "hr.g_singular" : "hr.tracial_pipeline", err.what());
    failing(std::nullopt);
  }
  try {
    const PositiveFunctional w = random_central_state(bc.d, m, rng, 0.05);
    const RepresentingMeasure rs = representing_expectation_state(m, w, bc.d, bc.a, bc.phi);
    bool ok = rep.record("hr.state.extension", rs.extension_deviation, tol(1e-7));
    ok &= rep.record("hr.state.preservation", rs.preservation_deviation, tol(1e-8));
    ok &= rep.record("hr.state.kernel_annihilation", rs.kernel_annihilation, tol(1e-8));
    ok &= rep.record("hr.state.normalization", rs.normalization_deviation, tol(1e-7));
    ok &= rep.record("hr.state.restriction", rs.restriction_deviation, tol(1e-8));
    if (!ok) failing(w.density());
  } catch (const Error& err) {
    rep.error(err.code() == ErrorCode::GSingular ? "hr.g_singular" : "hr.state_pipeline", err.what());
  }
}

inline void jensen_trial(Report& rep, const SuiteOptions& opt, std::size_t t) {
  Rng rng = trial_rng(opt.seed, 4 * t);
  const Index n = trial_dimension(rng, 2, std::min<Index>(opt.n_max, 6));
  const StarAlgebra m = StarAlgebra::full(n);
  const PositiveFunctional tau = PositiveFunctional::tracial(n);
  try {
    const BlockCharacter bc = random_block_character(n, rng);
    ConditionalExpectation psi = preserving_expectation(tau, bc.d, m);
    JensenInstance inst{bc.a, bc.d, bc.phi, tau, psi};
    const JensenSummary s = jensen_measure_suite(inst, 3, rng());
    rep.record("jensen.inequality", static_cast<double>(s.trials - s.inequality_passes), 0.0);
    rep.record("jensen.equality", s.max_equality_deviation, tol(1e-6));
    rep.record("jensen.boundary", static_cast<double>(s.boundary_cases - s.boundary_passes), 0.0);
    rep.record("jensen.monotonicity", static_cast<double>(s.monotonicity_failures), 0.0);
    rep.note("jensen.near_misses", static_cast<double>(s.near_misses));
    rep.note("jensen.max_inequality_excess", s.max_inequality_excess);
    if (opt.inject_fault) {
      const ComplexMatrix a = random_invertible_in(bc.a, rng);
      const double da = geometric_mean(tau, a).value;
      rep.record("jensen.equality", std::abs(da - 1.001 * da) / da, tol(1e-6));
    }
  } catch (const Error& err) {
    rep.error("jensen.construction", err.what());
  }
  try {
    const PositiveFunctional w = PositiveFunctional::state(random_density(n, rng));
    const ComplexMatrix a = random_gaussian(n, n, rng) + 0.5 * identity(n);
    const GeometricMeanReport g = geometric_mean(w, a);
    rep.record("jensen.decreasing_powers", g.max_increase, tol(1e-9));
    const ComplexMatrix x = random_gaussian(n, n, rng);
    const ComplexMatrix pd = hermitian_part(x.adjoint() * x) + 0.1 * identity(n);
    const SqrtIterationReport sq = sqrt_iteration(pd);
    rep.record("jensen.sqrt_limit", sq.limit_deviation, tol(1e-9));
    rep.record("jensen.sqrt_monotone", sq.monotonicity_violation, tol(1e-10) * std::max(1.0, op_norm(pd)));
    // commuting positive pair: functions of one Hermitian matrix
    const HermitianSpectrum s = hermitian_spectrum(pd);
    std::uniform_real_distribution<double> ur(0.2, 3.0);
    RealVector bv(n);
    for (Index i = 0; i < n; ++i) bv(i) = ur(rng);
    const ComplexMatrix b = s.eigenvectors * bv.cast<Complex>().asDiagonal() * s.eigenvectors.adjoint();
    rep.record("jensen.agm", -agm_margin(pd, b), tol(1e-9));
    const PositiveFunctional tn = PositiveFunctional::tracial(n);
    const double triples[3][3] = {{1, 2, 2}, {0.5, 1, 1}, {2.0 / 3.0, 1, 2}};
    for (const auto& e : triples) {
      const ComplexMatrix p = random_gaussian(n, n, rng), q = random_gaussian(n, n, rng);
      const HolderReport h = holder_tracial(tn, p, q, e[0], e[1], e[2]);
      rep.record("jensen.holder", (h.lhs - h.rhs) / std::max(1.0, h.rhs), tol(1e-9));
      rep.record("jensen.tracial_symmetry", h.symmetry_deviation, tol(1e-9));
    }
  } catch (const Error& err) {
    rep.error("jensen.utilities", err.what());
  }
}

inline void diagnosis_fixed(Report& rep, const SuiteOptions& opt) {
  // omega(a) = a_33 on M_3 with D = C1 + C E_33 and D = D_3
  const Index n = 3;
  ComplexMatrix rho = ComplexMatrix::Zero(n, n);
  rho(2, 2) = 1.0;
  const PositiveFunctional w = PositiveFunctional::state(rho);
  const StarAlgebra m = StarAlgebra::full(n);
  const StarAlgebra d1 = generate_star_algebra({matrix_unit(n, 2, 2)}, n);
  const StarAlgebra d2 = diagonal_algebra(n);
  Rng rng = trial_rng(opt.seed, 0xfeed);
  for (const StarAlgebra* d : {&d1, &d2}) {
    try {
      const ConditionalExpectation e = support_ideal_expectation(w, *d, m);
      double dev = 0.0;
      for (int k = 0; k < 4; ++k) {
        const ComplexMatrix x = random_gaussian(n, n, rng);
        dev = std::max(dev, (e(x) - x(2, 2) * matrix_unit(n, 2, 2)).cwiseAbs().maxCoeff());
      }
      rep.record("diagnosis.support_ideal_example", dev, 1e-10);
    } catch (const Error& err) {
      rep.error("diagnosis.support_ideal_example", err.what());
    }
  }
  ComplexMatrix skew(2, 2);
  skew << 0.5, 0.2, 0.2, 0.5;
  const DiagnosisReport dr = existence_diagnosis(PositiveFunctional::state(skew), diagonal_algebra(2), StarAlgebra::full(2));
  rep.record_bool("diagnosis.skew_example_nonexistence", !dr.expectation_exists && !dr.central);
}

inline void diagnosis_trial(Report& rep, const SuiteOptions& opt, std::size_t t) {
  Rng rng = trial_rng(opt.seed, 4 * t);
  const Index n = trial_dimension(rng, 2, opt.n_max);
  const StarAlgebra m = StarAlgebra::full(n);
  try {
    const StarAlgebra d = random_subalgebra_of(m, rng);
    const PositiveFunctional wc = random_central_state(d, m, rng);
    std::optional<PositiveFunctional> w = wc;
    bool expect_central = true;
    if (t % 2 == 1) {
      w = random_noncentral_state(wc, d, m, rng);
      expect_central = !w.has_value();
      if (!w) w = wc;
    }
    const DiagnosisReport dr = existence_diagnosis(*w, d, m);
    rep.record_bool("diagnosis.consistent", dr.consistent);
    rep.record_bool("diagnosis.equivalence", dr.central == dr.expectation_exists);
    rep.record_bool("diagnosis.generator_centrality", dr.central == expect_central);
    if (opt.inject_fault) rep.record_bool("diagnosis.equivalence", dr.central != dr.expectation_exists);
  } catch (const Error& err) {
    rep.error("diagnosis.trial", err.what());
  }
}

}  // namespace detail

/// Deterministic given the options. Unknown suite names throw ParseError.
inline Report run_suite(const SuiteOptions& opt) {
  const auto& names = suite_names();
  if (std::find(names.begin(), names.end(), opt.suite) == names.end())
    fail(ErrorCode::ParseError, "unknown suite '" + opt.suite + "'");
  if (opt.n_max < 2 || opt.n_max > 16) fail(ErrorCode::ParseError, "n-max must be in [2, 16]");
  Report rep;
  const bool all = opt.suite == "all";
  for (std::size_t t = 0; t < opt.trials; ++t) {
    if (all || opt.suite == "expectations") detail::expectations_trial(rep, opt, t);
    if (all || opt.suite == "hoffman-rossi") detail::hoffman_rossi_trial(rep, opt, t);
    if (all || opt.suite == "jensen") detail::jensen_trial(rep, opt, t);
    if (all || opt.suite == "diagnosis") detail::diagnosis_trial(rep, opt, t);
  }
  if (opt.trials > 0 && (all || opt.suite == "diagnosis")) detail::diagnosis_fixed(rep, opt);
  return rep;
}

inline Json suite_report_json(const SuiteOptions& opt, const Report& rep) {
  Json j = rep.to_json();
  j["suite"] = opt.suite;
  j["seed"] = opt.seed;
  j["n_max"] = opt.n_max;
  j["trials"] = opt.trials;
  j["inject_fault"] = opt.inject_fault;
  return j;
}

}  // namespace ncrep
