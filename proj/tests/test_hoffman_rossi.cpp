#include <gtest/gtest.h>

#include <functional>

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

ComplexMatrix diag(std::initializer_list<double> v) {
  ComplexMatrix d = ComplexMatrix::Zero(static_cast<Index>(v.size()), static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) d(i, i) = x, ++i;
  return d;
}

/// Matrix of a linear map on M_n built from its action on matrix units.
SuperOperator map_of(Index n, const std::function<ComplexMatrix(const ComplexMatrix&)>& f) {
  SuperOperator t(n * n, n * n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) t.col(j * n + i) = vec(f(matrix_unit(n, i, j)));
  return t;
}

Subalgebra t2() { return block_upper_triangular_algebra(2, {{0}, {1}}); }

TEST(HoffmanRossi, BlockCharacterPassesChecks) {
  Rng rng = trial_rng(31, 0);
  for (int t = 0; t < 10; ++t) {
    const BlockCharacter bc = random_block_character(2 + t % 5, rng);
    const CharacterCheck c = bc.phi.check();
    EXPECT_TRUE(c.ok()) << c.failure();
    EXPECT_EQ(c.kernel_dim + c.d_dim, c.a_dim);
  }
}

TEST(HoffmanRossi, NonMultiplicativeMapIsRejected) {
  // Phi(E01) = E00 is linear, unital and the identity on D_2, but not multiplicative
  const SuperOperator bad = map_of(2, [](const ComplexMatrix& x) {
    ComplexMatrix y = ComplexMatrix::Zero(2, 2);
    y(0, 0) = x(0, 0) + x(0, 1);
    y(1, 1) = x(1, 1);
    return y;
  });
  try {
    DCharacter::checked(t2(), diagonal_algebra(2), bad);
    FAIL() << "expected InvariantViolation";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvariantViolation);
    EXPECT_NE(std::string(e.what()).find("multiplicative"), std::string::npos) << e.what();
  }
}

TEST(HoffmanRossi, T2DiagonalCharacterGivesDiagonalCompression) {
  const BlockCharacter bc = make_block_character(2, {{0}, {1}});
  const RepresentingMeasure rm =
      representing_expectation_tracial(StarAlgebra::full(2), PositiveFunctional::tracial(2), bc.d, bc.a, bc.phi);
  Rng rng = trial_rng(31, 1);
  for (int t = 0; t < 5; ++t) {
    const ComplexMatrix x = random_gaussian(2, 2, rng);
    EXPECT_LE((rm.psi(x) - oracle::block_compression({{0}, {1}}, x)).norm(), 1e-9);
  }
  EXPECT_LE(rm.extension_deviation, 1e-7);
  EXPECT_LE(rm.preservation_deviation, 1e-8);
}

TEST(HoffmanRossi, ScalarCharacterGivesPointState) {
  // A = T_2, D = C I, Phi(a) = a_00 I: Psi(x) = x_00 I, rho = E_00
  const SuperOperator phi_map = map_of(2, [](const ComplexMatrix& x) { return ComplexMatrix(x(0, 0) * identity(2)); });
  const StarAlgebra d = StarAlgebra::scalars(2);
  const DCharacter phi = DCharacter::checked(t2(), d, phi_map);
  const RepresentingMeasure rm = representing_expectation_tracial(StarAlgebra::full(2), PositiveFunctional::tracial(2), d, t2(), phi);
  EXPECT_LE((rm.rho.density() - matrix_unit(2, 0, 0)).norm(), 1e-8);
  Rng rng = trial_rng(31, 2);
  const ComplexMatrix x = random_gaussian(2, 2, rng);
  EXPECT_LE((rm.psi(x) - x(0, 0) * identity(2)).norm(), 1e-8);
}

TEST(HoffmanRossi, StatePipelineScalarCharacter) {
  // omega = diag(.7, .3), A = T_2, D = C I, Phi(a) = a_11 I: Psi(x) = x_11 I
  const SuperOperator phi_map = map_of(2, [](const ComplexMatrix& x) { return ComplexMatrix(x(1, 1) * identity(2)); });
  const StarAlgebra d = StarAlgebra::scalars(2);
  const DCharacter phi = DCharacter::checked(t2(), d, phi_map);
  const PositiveFunctional w = PositiveFunctional::state(diag({0.7, 0.3}));
  const RepresentingMeasure rm = representing_expectation_state(StarAlgebra::full(2), w, d, t2(), phi);
  Rng rng = trial_rng(31, 3);
  const ComplexMatrix x = random_gaussian(2, 2, rng);
  EXPECT_LE((rm.psi(x) - x(1, 1) * identity(2)).norm(), 1e-8);
  EXPECT_LE(rm.normalization_deviation, 1e-7);
}

TEST(HoffmanRossi, FullAlgebraIdentityCharacter) {
  const BlockCharacter bc = make_block_character(3, {{0, 1, 2}});
  const RepresentingMeasure rm =
      representing_expectation_tracial(StarAlgebra::full(3), PositiveFunctional::tracial(3), bc.d, bc.a, bc.phi);
  EXPECT_LE((rm.psi.matrix() - SuperOperator::Identity(9, 9)).norm(), 1e-8);
  EXPECT_LE((rm.rho.density() - PositiveFunctional::tracial(3).density()).norm(), 1e-9);
}

TEST(HoffmanRossi, RandomBlockCharactersExtend) {
  Rng rng = trial_rng(31, 4);
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + t % 6;
    const BlockCharacter bc = random_block_character(n, rng);
    const RepresentingMeasure rm =
        representing_expectation_tracial(StarAlgebra::full(n), PositiveFunctional::tracial(n), bc.d, bc.a, bc.phi);
    EXPECT_LE(extension_deviation(rm.psi, bc.phi), 1e-7);
    EXPECT_LE(preservation_deviation(rm.psi, rm.rho), 1e-8);
    EXPECT_TRUE(rm.psi.check().ok()) << rm.psi.check().describe();
    EXPECT_LE(rm.kernel_annihilation, 1e-8);
    // omega o Phi on A equals rho on A
    EXPECT_LE(rm.restriction_deviation, 1e-8);
  }
}

TEST(HoffmanRossi, TracialAndStatePipelinesAgree) {
  Rng rng = trial_rng(31, 5);
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 5;
    const BlockCharacter bc = random_block_character(n, rng);
    const StarAlgebra m = StarAlgebra::full(n);
    const PositiveFunctional tau = PositiveFunctional::tracial(n);
    const RepresentingMeasure r1 = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi);
    const RepresentingMeasure r2 = representing_expectation_state(m, tau, bc.d, bc.a, bc.phi);
    EXPECT_LE(expectation_distance(r1.psi, r2.psi), 1e-7);
  }
}

TEST(HoffmanRossi, StatePipelineWithNonTracialCentralState) {
  Rng rng = trial_rng(31, 6);
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 5;
    const BlockCharacter bc = random_block_character(n, rng);
    const StarAlgebra m = StarAlgebra::full(n);
    const PositiveFunctional w = random_central_state(bc.d, m, rng, 0.05);
    const RepresentingMeasure rm = representing_expectation_state(m, w, bc.d, bc.a, bc.phi);
    EXPECT_LE(extension_deviation(rm.psi, bc.phi), 1e-7);
    EXPECT_LE(preservation_deviation(rm.psi, rm.rho), 1e-8);
  }
}

TEST(HoffmanRossi, NonCentralStateIsRejected) {
  ComplexMatrix skew(2, 2);
  skew << 0.5, 0.2, 0.2, 0.5;
  const BlockCharacter bc = make_block_character(2, {{0}, {1}});
  expect_code(ErrorCode::NotCentral, [&] {
    representing_expectation_state(StarAlgebra::full(2), PositiveFunctional::state(skew), bc.d, bc.a, bc.phi);
  });
}

TEST(HoffmanRossi, DirectSumOfTwoPoints) {
  const Index n = 2;
  const StarAlgebra m = StarAlgebra::full(n);
  const StarAlgebra d = diagonal_algebra(n);
  std::vector<std::pair<ComplexMatrix, ConditionalExpectation>> pieces;
  for (Index i = 0; i < n; ++i) {
    const ComplexMatrix e = matrix_unit(n, i, i);
    pieces.emplace_back(e, ConditionalExpectation(sandwich_map(e, e), corner(m, e), corner(d, e)));
  }
  const ConditionalExpectation psi = compose_direct_sum(pieces, d, m);
  Rng rng = trial_rng(31, 7);
  const ComplexMatrix x = random_gaussian(n, n, rng);
  EXPECT_LE((psi(x) - oracle::block_compression({{0}, {1}}, x)).norm(), 1e-12);
}

TEST(HoffmanRossi, DirectSumOfTwoBlocks) {
  const Index n = 4;
  const StarAlgebra m = StarAlgebra::full(n);
  const ComplexMatrix e1 = diag({1, 1, 0, 0}), e2 = diag({0, 0, 1, 1});
  const StarAlgebra d = StarAlgebra::trusted(orthonormalize(std::vector<ComplexMatrix>{e1, e2}));
  std::vector<std::pair<ComplexMatrix, ConditionalExpectation>> pieces;
  for (const ComplexMatrix& e : {e1, e2}) {
    const SuperOperator t = vec(e) * trace_pairing_row(e) * 0.5;
    pieces.emplace_back(e, ConditionalExpectation(t, corner(m, e), corner(d, e)));
  }
  const ConditionalExpectation psi = compose_direct_sum(pieces, d, m);
  Rng rng = trial_rng(31, 8);
  const ComplexMatrix x = random_gaussian(n, n, rng);
  const ComplexMatrix expected = 0.5 * (e1 * x).trace() * e1 + 0.5 * (e2 * x).trace() * e2;
  EXPECT_LE((psi(x) - expected).norm(), 1e-12);
  // projections that do not sum to 1
  std::vector<std::pair<ComplexMatrix, ConditionalExpectation>> short_pieces{pieces[0]};
  expect_code(ErrorCode::ProjectionsNotPartition, [&] { compose_direct_sum(short_pieces, d, m); });
}

TEST(HoffmanRossi, CommutativePointMass) {
  const Instance inst = parse_instance(std::string(NCREP_INSTANCES_DIR) + "/commutative_c3.json");
  const RepresentingMeasure rm =
      representing_expectation_commutative(inst.m, PositiveFunctional::tracial(3), inst.d, *inst.a, *inst.phi);
  EXPECT_LE((rm.rho.density() - matrix_unit(3, 0, 0)).norm(), 1e-8);
  expect_code(ErrorCode::NotAbelian, [&] {
    const BlockCharacter bc = make_block_character(2, {{0}, {1}});
    representing_expectation_commutative(StarAlgebra::full(2), PositiveFunctional::tracial(2), bc.d, bc.a, bc.phi);
  });
}

TEST(HoffmanRossi, DensityRouteMatchesPipeline) {
  const BlockCharacter bc = make_block_character(2, {{0}, {1}});
  const StarAlgebra m = StarAlgebra::full(2);
  const PositiveFunctional tau = PositiveFunctional::tracial(2);
  const RepresentingMeasure rm = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi);
  const ConditionalExpectation e = extension_via_ss_density(m, tau, bc.d, bc.a, bc.phi, rm.rho);
  EXPECT_LE(expectation_distance(e, rm.psi), 1e-8);
  // A = D = D_2 is not dense
  const Subalgebra dd = diagonal_algebra(2).as_subalgebra();
  const DCharacter id = DCharacter::checked(dd, diagonal_algebra(2), SuperOperator::Identity(4, 4));
  expect_code(ErrorCode::NotDense, [&] { extension_via_ss_density(m, tau, diagonal_algebra(2), dd, id, tau); });
}

TEST(HoffmanRossi, PerturbedExtensionFunctionalLeavesPsiUnchanged) {
  Rng rng = trial_rng(31, 9);
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 5;
    const BlockCharacter bc = random_block_character(n, rng);
    const StarAlgebra m = StarAlgebra::full(n);
    const PositiveFunctional tau = PositiveFunctional::tracial(n);
    const RepresentingMeasure base = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi);
    const ComplexMatrix y = detail::annihilator_perturbation(m, bc.a, density_in(tau, m), rng, 0.1 * base.r.norm());
    PipelineOptions opt;
    opt.r_override = base.r + y;
    const RepresentingMeasure pert = representing_expectation_tracial(m, tau, bc.d, bc.a, bc.phi, opt);
    EXPECT_LE(expectation_distance(base.psi, pert.psi), 1e-7);
  }
}

TEST(HoffmanRossi, MthCriterionExamples) {
  const RealVector mu = RealVector::Constant(4, 0.25), g = RealVector::Ones(4);
  const MthReport r = mth_check(mu, g);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.inverse_integral, 1.0, 1e-15);
  RealVector g0 = g;
  g0(2) = 0.0;
  const MthReport r0 = mth_check(mu, g0);
  EXPECT_FALSE(r0.holds);
  EXPECT_TRUE(r0.g_vanishes_on_support);
  // g = 0 off the support does not matter
  RealVector mu0 = mu;
  mu0(2) = 0.0;
  mu0 /= mu0.sum();
  EXPECT_TRUE(mth_check(mu0, g0).holds);
}

TEST(HoffmanRossi, MthCriterionMatchesBruteForce) {
  Rng rng = trial_rng(31, 10);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> k(1, 12);
  for (int t = 0; t < 100; ++t) {
    const int atoms = k(rng);
    RealVector mu(atoms), g(atoms);
    for (int i = 0; i < atoms; ++i) {
      mu(i) = u(rng) < 0.2 ? 0.0 : u(rng);
      g(i) = u(rng) < 0.1 ? 0.0 : 2.0 * u(rng);
    }
    if (mu.sum() == 0.0) mu(0) = 1.0;
    const MthReport r = mth_check(mu, g);
    const double sup = oracle::mth_supremum(mu, g, rng);
    EXPECT_EQ(r.holds, sup <= 1.0 + 1e-9) << "sup " << sup << " criterion " << r.inverse_integral;
  }
}

TEST(HoffmanRossi, PipelineMeasureSpaceSatisfiesCriterion) {
  Rng rng = trial_rng(31, 11);
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 5;
    const BlockCharacter bc = random_block_character(n, rng);
    const PositiveFunctional tau = PositiveFunctional::tracial(n);
    const RepresentingMeasure rm = representing_expectation_tracial(StarAlgebra::full(n), tau, bc.d, bc.a, bc.phi);
    const auto [mu, g] = pipeline_measure_space(rm, tau);
    EXPECT_TRUE(mth_check(mu, g).holds);
  }
}

}  // namespace
