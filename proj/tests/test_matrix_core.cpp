#include <gtest/gtest.h>

#include "ncrep/ncrep.hpp"
#include "oracles.hpp"

using namespace ncrep;

namespace {

Rng rng_for(std::uint64_t i) { return trial_rng(1234, i); }

TEST(MatrixCore, VecMatchesLoopOracle) {
  Rng rng = rng_for(0);
  const ComplexMatrix x = random_gaussian(4, 4, rng);
  EXPECT_LE((vec(x) - oracle::vec(x)).norm(), 0.0);
  EXPECT_LE((unvec(vec(x), 4) - x).norm(), 0.0);
}

TEST(MatrixCore, KronMatchesLoopOracle) {
  Rng rng = rng_for(1);
  const ComplexMatrix a = random_gaussian(3, 3, rng), b = random_gaussian(2, 2, rng);
  EXPECT_LE((kron(a, b) - oracle::kron(a, b)).norm(), 1e-14);
}

TEST(MatrixCore, SandwichMapActsAsAXB) {
  Rng rng = rng_for(2);
  for (int t = 0; t < 10; ++t) {
    const ComplexMatrix a = random_gaussian(3, 3, rng), b = random_gaussian(3, 3, rng), x = random_gaussian(3, 3, rng);
    EXPECT_LE((ncrep::apply(sandwich_map(a, b), x) - a * x * b).norm(), 1e-12);
    EXPECT_LE((ncrep::apply(left_multiplication(a), x) - a * x).norm(), 1e-12);
    EXPECT_LE((ncrep::apply(right_multiplication(b), x) - x * b).norm(), 1e-12);
    EXPECT_LE((ncrep::apply(commutator_map(a), x) - commutator(a, x)).norm(), 1e-12);
  }
}

TEST(MatrixCore, TracePairingRowComputesTrace) {
  Rng rng = rng_for(3);
  const ComplexMatrix rho = random_gaussian(4, 4, rng), x = random_gaussian(4, 4, rng);
  const Complex lhs = trace_pairing_row(rho) * vec(x);
  EXPECT_LE(std::abs(lhs - (rho * x).trace()), 1e-12);
  EXPECT_LE((density_from_row(trace_pairing_row(rho), 4) - rho).norm(), 0.0);
}

TEST(MatrixCore, HsInnerIsTraceOfYStarX) {
  Rng rng = rng_for(4);
  const ComplexMatrix x = random_gaussian(3, 3, rng), y = random_gaussian(3, 3, rng);
  EXPECT_LE(std::abs(hs_inner(x, y) - (y.adjoint() * x).trace()), 1e-12);
}

TEST(MatrixCore, FunctionalCalculusMatchesEigenMatrixFunctions) {
  Rng rng = rng_for(5);
  const ComplexMatrix p = random_density(4, rng, 0.1) * 4.0;
  EXPECT_LE((herm_funcalc(p, ScalarFunction::exp()) - ComplexMatrix(p.exp())).norm(), 1e-10);
  EXPECT_LE((herm_funcalc(p, ScalarFunction::log()) - ComplexMatrix(p.log())).norm(), 1e-9);
  const ComplexMatrix s = herm_funcalc(p, ScalarFunction::sqrt());
  EXPECT_LE((s * s - p).norm(), 1e-12);
  EXPECT_LE((herm_funcalc(p, ScalarFunction::pow(-1.0)) * p - identity(4)).norm(), 1e-9);
  const ComplexMatrix u = herm_funcalc(p, ScalarFunction::power_it(0.7));
  EXPECT_LE((u * u.adjoint() - identity(4)).norm(), 1e-12);
}

TEST(MatrixCore, LogOfNonPositiveDefiniteThrows) {
  ComplexMatrix x = ComplexMatrix::Zero(2, 2);
  x(0, 0) = 1.0;
  try {
    herm_funcalc(x, ScalarFunction::log());
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotPositiveDefinite);
  }
}

TEST(MatrixCore, NonHermitianInputThrows) {
  ComplexMatrix x = matrix_unit(2, 0, 1);
  try {
    herm_funcalc(x, ScalarFunction::sqrt());
    FAIL() << "expected NotHermitian";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotHermitian);
  }
}

TEST(MatrixCore, HermitianSpectrumAscendingAndReconstructs) {
  Rng rng = rng_for(6);
  const ComplexMatrix h = hermitian_part(random_gaussian(5, 5, rng));
  const HermitianSpectrum s = hermitian_spectrum(h);
  for (Index i = 1; i < 5; ++i) EXPECT_LE(s.eigenvalues(i - 1), s.eigenvalues(i));
  EXPECT_LE((s.reconstruct() - h).norm(), 1e-12);
}

TEST(MatrixCore, OrthonormalizeDropsDependentMembers) {
  const Index n = 3;
  std::vector<ComplexMatrix> xs{matrix_unit(n, 0, 0), matrix_unit(n, 1, 1), matrix_unit(n, 0, 0) + matrix_unit(n, 1, 1),
                                matrix_unit(n, 0, 2)};
  const OperatorSubspace s = orthonormalize(xs);
  EXPECT_EQ(s.dim(), oracle::span_dim(xs));
  EXPECT_LE(s.gram_deviation(), 1e-12);
  for (const auto& x : xs) EXPECT_TRUE(s.contains(x));
  EXPECT_FALSE(s.contains(matrix_unit(n, 2, 2)));
}

TEST(MatrixCore, SubspaceProjectionMatchesLeastSquares) {
  Rng rng = rng_for(7);
  std::vector<ComplexMatrix> xs;
  for (int k = 0; k < 4; ++k) xs.push_back(random_gaussian(3, 3, rng));
  const OperatorSubspace s = orthonormalize(xs);
  const ComplexMatrix y = random_gaussian(3, 3, rng);
  EXPECT_NEAR(s.residual(y), oracle::span_residual(xs, y), 1e-10);
  EXPECT_LE((s.project(s.project(y)) - s.project(y)).norm(), 1e-12);
}

TEST(MatrixCore, IntersectionAndDistance) {
  const Index n = 2;
  const OperatorSubspace a = orthonormalize(std::vector<ComplexMatrix>{matrix_unit(n, 0, 0), matrix_unit(n, 0, 1)});
  const OperatorSubspace b = orthonormalize(std::vector<ComplexMatrix>{matrix_unit(n, 0, 0), matrix_unit(n, 1, 0)});
  const OperatorSubspace c = subspace_intersection(a, b);
  EXPECT_EQ(c.dim(), 1);
  EXPECT_TRUE(c.contains(matrix_unit(n, 0, 0)));
  EXPECT_LE(subspace_distance(a, a), 1e-12);
  EXPECT_GT(subspace_distance(a, b), 0.5);
  EXPECT_EQ(subspace_sum(a, b).dim(), 3);
}

TEST(MatrixCore, NullSpaceAndRank) {
  ComplexMatrix l(2, 3);
  l << 1, 2, 3, 2, 4, 6;
  EXPECT_EQ(numerical_rank(l), 1);
  const ComplexMatrix k = null_space(l);
  EXPECT_EQ(k.cols(), 2);
  EXPECT_LE((l * k).norm(), 1e-12);
}

TEST(MatrixCore, ToleranceScaleParsing) {
  EXPECT_TRUE(parse_tolerance_scale("2.5").has_value());
  EXPECT_FALSE(parse_tolerance_scale("abc").has_value());
  EXPECT_FALSE(parse_tolerance_scale("-1").has_value());
  EXPECT_FALSE(parse_tolerance_scale("inf").has_value());
}

TEST(MatrixCore, DimensionMismatchThrows) {
  try {
    require_dim(identity(3), 2, "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(MatrixCore, ProjectionExamples) {
  ComplexMatrix x(2, 2);
  x << 1.0, 2.0, 3.0, 4.0;
  const OperatorSubspace upper = orthonormalize(std::vector<ComplexMatrix>{matrix_unit(2, 0, 1)});
  ComplexMatrix expected = ComplexMatrix::Zero(2, 2);
  expected(0, 1) = 2.0;
  EXPECT_LE((upper.project(x) - expected).norm(), 1e-14);
  const OperatorSubspace scalars = orthonormalize(std::vector<ComplexMatrix>{identity(2)});
  EXPECT_LE((scalars.project(x) - 2.5 * identity(2)).norm(), 1e-14);
}

TEST(MatrixCore, OrthonormalizeNearDependentPair) {
  const ComplexMatrix e = matrix_unit(2, 0, 0);
  EXPECT_EQ(orthonormalize(std::vector<ComplexMatrix>{e, e + 1e-15 * matrix_unit(2, 1, 1)}).dim(), 1);
  EXPECT_EQ(orthonormalize(std::vector<ComplexMatrix>{identity(2), 2.0 * identity(2)}).dim(), 1);
}

}  // namespace
