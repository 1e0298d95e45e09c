#include <gtest/gtest.h>

#include "ncrep/ncrep.hpp"
#include "oracles.hpp"

using namespace ncrep;

namespace {

template <class F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

ComplexMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
  ComplexMatrix m(2, 2);
  m << a, b, c, d;
  return m;
}

JensenInstance t2_instance() {
  const BlockCharacter bc = make_block_character(2, {{0}, {1}});
  const PositiveFunctional tau = PositiveFunctional::tracial(2);
  const ConditionalExpectation psi = preserving_expectation(tau, bc.d, StarAlgebra::full(2));
  return {bc.a, bc.d, bc.phi, tau, psi};
}

TEST(Jensen, GeometricMeanExamples) {
  const PositiveFunctional tau = PositiveFunctional::tracial(2);
  EXPECT_NEAR(geometric_mean(tau, mat2(1, 0, 0, 4)).value, 2.0, 1e-12);
  EXPECT_NEAR(geometric_mean(tau, identity(2)).value, 1.0, 1e-15);
  expect_code(ErrorCode::NotInvertible, [&] { geometric_mean(tau, mat2(1, 0, 0, 0)); });
  expect_code(ErrorCode::NotNormalized, [&] { geometric_mean(PositiveFunctional::from_density(identity(2)), identity(2)); });
}

TEST(Jensen, GeometricMeanMatchesOracles) {
  Rng rng = trial_rng(41, 0);
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + t % 5;
    const ComplexMatrix a = random_gaussian(n, n, rng) + 2.0 * identity(n);
    const PositiveFunctional tau = PositiveFunctional::tracial(n);
    const double dt = geometric_mean(tau, a).value;
    EXPECT_NEAR(dt / oracle::det_geometric_mean(a), 1.0, 1e-10);
    const PositiveFunctional w = PositiveFunctional::state(random_density(n, rng, 0.05));
    EXPECT_NEAR(geometric_mean(w, a).value / oracle::geometric_mean(w.density(), a), 1.0, 1e-8);
  }
}

TEST(Jensen, PowerSequenceDecreases) {
  Rng rng = trial_rng(41, 1);
  for (Index n : {2, 5, 10, 20}) {
    const ComplexMatrix a = random_gaussian(n, n, rng) + 3.0 * identity(n);
    const GeometricMeanReport r = geometric_mean(PositiveFunctional::tracial(n), a);
    EXPECT_TRUE(r.monotone());
    for (std::size_t k = 1; k < r.power_sequence.size(); ++k)
      EXPECT_LE(r.power_sequence[k], r.power_sequence[k - 1] * (1.0 + 1e-9));
    EXPECT_GE(r.power_sequence.back(), r.value * (1.0 - 1e-12));
  }
}

TEST(Jensen, UpperTriangularDeterminant) {
  const PositiveFunctional tau = PositiveFunctional::tracial(2);
  const ComplexMatrix a = mat2(1, 1, 0, 2);
  EXPECT_NEAR(geometric_mean(tau, a).value, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(geometric_mean(tau, mat2(1, 5, 0, 1)).value, 1.0, 1e-12);
}

TEST(Jensen, SqrtIterationDiagonal) {
  const SqrtIterationReport r = sqrt_iteration(mat2(4, 0, 0, 9));
  EXPECT_LE((r.iterates.back() - mat2(2, 0, 0, 3)).norm(), 1e-12);
  // scalar Newton on each eigenvalue, step by step
  double x = 4.0, y = 9.0;
  for (std::size_t k = 1; k < std::min<std::size_t>(r.iterates.size(), 6); ++k) {
    x = 0.5 * (x + 4.0 / x);
    y = 0.5 * (y + 9.0 / y);
    EXPECT_NEAR(r.iterates[k](0, 0).real(), x, 1e-12);
    EXPECT_NEAR(r.iterates[k](1, 1).real(), y, 1e-12);
  }
  EXPECT_LE(r.monotonicity_violation, 1e-9);
}

TEST(Jensen, SqrtIterationMatchesEigenSqrt) {
  const ComplexMatrix a = mat2(2, 1, 1, 2);
  const SqrtIterationReport r = sqrt_iteration(a);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(a);
  EXPECT_LE((r.iterates.back() - ComplexMatrix(es.operatorSqrt())).norm(), 1e-10);
  EXPECT_LE((herm_funcalc(a, ScalarFunction::pow(0.5)) - r.iterates.back()).norm(), 1e-10);
  Rng rng = trial_rng(41, 2);
  const ComplexMatrix p = random_density(3, rng, 0.1) * 3.0;
  EXPECT_LE(sqrt_iteration(p).limit_deviation, 1e-9);
}

TEST(Jensen, AgmMarginIsNonnegative) {
  Rng rng = trial_rng(41, 3);
  for (int t = 0; t < 10; ++t) {
    const ComplexMatrix a = random_density(3, rng, 0.1) * 3.0;
    // b = a gives (a^{1/2} - 1)^2; b = a^{1/2} gives equality
    EXPECT_GE(agm_margin(a, a), -1e-10);
    EXPECT_NEAR(agm_margin(a, herm_funcalc(a, ScalarFunction::sqrt())), 0.0, 1e-10);
  }
  expect_code(ErrorCode::DoesNotCommute, [] { agm_margin(mat2(2, 0, 0, 1), mat2(2, 1, 1, 2)); });
}

TEST(Jensen, HolderExamples) {
  const PositiveFunctional tau = PositiveFunctional::tracial(3);
  const HolderReport eq = holder_tracial(tau, identity(3), identity(3), 1, 2, 2);
  EXPECT_NEAR(eq.lhs, 1.0, 1e-14);
  EXPECT_NEAR(eq.rhs, 1.0, 1e-14);
  Rng rng = trial_rng(41, 4);
  const std::array<std::array<double, 3>, 4> exps{{{1, 2, 2}, {0.5, 1, 1}, {2.0 / 3.0, 1, 2}, {1, 1, INFINITY}}};
  for (int t = 0; t < 50; ++t) {
    const ComplexMatrix a = random_gaussian(3, 3, rng), b = random_gaussian(3, 3, rng);
    for (const auto& e : exps) {
      const HolderReport r = holder_tracial(tau, a, b, e[0], e[1], e[2]);
      EXPECT_LE(r.lhs, r.rhs * (1.0 + 1e-9));
      EXPECT_LE(r.symmetry_deviation, 1e-9);
      if (!std::isinf(e[2])) {
        const double lhs = std::pow(oracle::abs_moment(tau.density(), a * b, e[0]), 1.0 / e[0]);
        EXPECT_NEAR(lhs / r.lhs, 1.0, 1e-9);
      }
    }
  }
  expect_code(ErrorCode::NotTracial, [] {
    ComplexMatrix rho = identity(2) * 0.5;
    rho(0, 0) = 0.7;
    rho(1, 1) = 0.3;
    holder_tracial(PositiveFunctional::state(rho), identity(2), identity(2), 1, 2, 2);
  });
}

TEST(Jensen, LogmodularWitness) {
  const Subalgebra a2 = block_upper_triangular_algebra(2, {{0}, {1}});
  EXPECT_LE((logmodular_witness(a2, identity(2)) - identity(2)).norm(), 1e-14);
  const ComplexMatrix w = logmodular_witness(a2, mat2(2, 1, 1, 2));
  const ComplexMatrix expected = mat2(std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0, std::sqrt(1.5));
  EXPECT_LE((w - expected).norm(), 1e-12);
  // 2 + 1 blocks in M_3 in a random frame
  Rng rng = trial_rng(41, 5);
  const ComplexMatrix u = random_unitary(3, rng);
  const Subalgebra a3 = conjugate(block_upper_triangular_algebra(3, {{0, 1}, {2}}), u);
  const ComplexMatrix b = random_density(3, rng, 0.2) * 3.0;
  const ComplexMatrix x = logmodular_witness(a3, b);
  EXPECT_LE((x.adjoint() * x - b).norm(), 1e-10);
  EXPECT_TRUE(a3.contains(x));
  expect_code(ErrorCode::NotBoundedBelow, [&] { logmodular_witness(a2, mat2(1, 0, 0, -1)); });
  expect_code(ErrorCode::NotTriangularType, [&] { logmodular_witness(generate_algebra({mat2(0, 1, 0, 0)}, 2), identity(2)); });
}

TEST(Jensen, EqualityOnTriangularExamples) {
  const JensenInstance inst = t2_instance();
  for (const ComplexMatrix& a : {mat2(1, 1, 0, 2), mat2(1, 5, 0, 1)}) {
    const JensenReport r = jensen_check(inst.w, inst.phi, inst.psi, a);
    EXPECT_TRUE(r.ok());
    EXPECT_TRUE(r.equality_checked);
    EXPECT_NEAR(r.delta_a, r.delta_phi, 1e-12);
    EXPECT_NEAR(r.delta_a, oracle::det_geometric_mean(a), 1e-12);
  }
  // a in D: Phi(a) = a
  const JensenReport d = jensen_check(inst.w, inst.phi, inst.psi, mat2(3, 0, 0, 0.5));
  EXPECT_NEAR(d.equality_deviation, 0.0, 1e-14);
}

TEST(Jensen, SingularPhiIsInequalityOnly) {
  const JensenInstance inst = t2_instance();
  const JensenReport r = jensen_check(inst.w, inst.phi, inst.psi, mat2(0, 1, 0, 1));
  EXPECT_TRUE(r.phi_singular);
  EXPECT_FALSE(r.equality_checked);
  EXPECT_TRUE(r.inequality_holds);
}

TEST(Jensen, T2SuiteAllEqualities) {
  const JensenSummary s = jensen_measure_suite(t2_instance(), 100, 42);
  EXPECT_TRUE(s.ok());
  EXPECT_EQ(s.inequality_passes, s.trials);
  EXPECT_EQ(s.equality_passes, s.equality_checked);
  EXPECT_GT(s.boundary_cases, 0u);
  EXPECT_EQ(s.boundary_passes, s.boundary_cases);
}

TEST(Jensen, DegenerateFullAlgebraSuite) {
  const BlockCharacter bc = make_block_character(3, {{0, 1, 2}});
  const PositiveFunctional tau = PositiveFunctional::tracial(3);
  const ConditionalExpectation psi = preserving_expectation(tau, bc.d, StarAlgebra::full(3));
  const JensenSummary s = jensen_measure_suite({bc.a, bc.d, bc.phi, tau, psi}, 20, 7);
  EXPECT_TRUE(s.ok());
  EXPECT_LE(s.max_equality_deviation, 1e-12);
}

TEST(Jensen, RandomBlockTriangularEquality) {
  Rng rng = trial_rng(41, 6);
  for (int t = 0; t < 30; ++t) {
    const Index n = 2 + t % 5;
    const BlockCharacter bc = random_block_character(n, rng);
    const PositiveFunctional tau = PositiveFunctional::tracial(n);
    const ConditionalExpectation psi = preserving_expectation(tau, bc.d, StarAlgebra::full(n));
    const ComplexMatrix a = random_invertible_in(bc.a, rng);
    const JensenReport r = jensen_check(tau, bc.phi, psi, a);
    EXPECT_TRUE(r.ok());
    const double oracle_a = oracle::det_geometric_mean(a), oracle_phi = oracle::det_geometric_mean(bc.phi(a));
    EXPECT_LE(std::abs(oracle_a - oracle_phi) / oracle_a, 1e-6);
    EXPECT_LE(std::abs(r.delta_a - oracle_a) / oracle_a, 1e-6);
  }
}

}  // namespace
