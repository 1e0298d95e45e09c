#pragma once

// Random instance generators. All take an explicit engine so that runs are
// reproducible from a seed.

#include <algorithm>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "ncrep/hoffman_rossi.hpp"

namespace ncrep {

using Rng = std::mt19937_64;

/// Independent stream for trial `index` of a run seeded with `seed`.
inline Rng trial_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

template <class R>
ComplexMatrix random_gaussian(Index rows, Index cols, R& rng) {
  std::normal_distribution<double> g;
  ComplexMatrix z(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) z(i, j) = Complex(g(rng), g(rng));
  return z;
}

/// Haar unitary: QR of a Gaussian matrix with the phases of R divided out.
template <class R>
ComplexMatrix random_unitary(Index n, R& rng) {
  const ComplexMatrix z = random_gaussian(n, n, rng);
  Eigen::HouseholderQR<ComplexMatrix> qr(z);
  ComplexMatrix q = qr.householderQ();
  const ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    const double a = std::abs(r(j, j));
    if (a > 0.0) q.col(j) *= r(j, j) / a;
  }
  return q;
}

/// Random ordered partition of {0..n-1}; indices shuffled unless contiguous.
template <class R>
Partition random_partition(Index n, R& rng, bool contiguous = false) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  if (!contiguous) std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_int_distribution<Index> nb(1, n);
  const Index k = nb(rng);
  // k - 1 distinct cut points in 1..n-1
  std::vector<Index> cuts(static_cast<std::size_t>(n - 1));
  std::iota(cuts.begin(), cuts.end(), Index{1});
  std::shuffle(cuts.begin(), cuts.end(), rng);
  cuts.resize(static_cast<std::size_t>(k - 1));
  cuts.push_back(0);
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  Partition p;
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    std::vector<Index> blk(idx.begin() + cuts[b], idx.begin() + cuts[b + 1]);
    p.push_back(std::move(blk));
  }
  return p;
}

/// rho = X^*X + delta I, normalized.
template <class R>
ComplexMatrix random_density(Index n, R& rng, double delta = 1e-3) {
  const ComplexMatrix x = random_gaussian(n, n, rng);
  ComplexMatrix rho = hermitian_part(x.adjoint() * x) + delta * identity(n);
  return rho / rho.trace().real();
}

/// Faithful state whose density lies in M (trace-preserving projection of a
/// random density).
template <class R>
PositiveFunctional random_state_in(const StarAlgebra& m, R& rng, double delta = 1e-3) {
  const ComplexMatrix rho = random_density(m.ambient_dim(), rng, delta);
  return PositiveFunctional::normalized(hermitian_part(m.project(rho)));
}

/// Faithful D-central state: density projected onto D' cap M.
template <class R>
PositiveFunctional random_central_state(const StarAlgebra& d, const StarAlgebra& m, R& rng, double delta = 1e-3) {
  const StarAlgebra rel = commutant(d, m);
  const ComplexMatrix rho = random_density(m.ambient_dim(), rng, delta);
  return PositiveFunctional::normalized(hermitian_part(rel.project(rho)));
}

/// Faithful state agreeing with `central` on D but not D-central: adds a
/// Hermitian H in M with P_D(H) = 0 and [H, D] != 0. Returns nullopt when D
/// is central in M (no such H).
template <class R>
std::optional<PositiveFunctional> random_noncentral_state(const PositiveFunctional& central, const StarAlgebra& d,
                                                          const StarAlgebra& m, R& rng) {
  const Index n = m.ambient_dim();
  const StarAlgebra rel = commutant(d, m);
  for (int attempt = 0; attempt < 8; ++attempt) {
    ComplexMatrix h = hermitian_part(m.project(random_gaussian(n, n, rng)));
    h = hermitian_part(h - d.project(h));
    const ComplexMatrix off = h - rel.project(h);
    if (off.norm() < 1e-3 * std::max(1.0, h.norm())) continue;
    const ComplexMatrix rho = central.density();
    const double lam = hermitian_spectrum(rho).min();
    const ComplexMatrix pert = hermitian_part(rho + (0.5 * lam / op_norm(h)) * h);
    return PositiveFunctional::normalized(pert);
  }
  return std::nullopt;
}

/// Block character over a random ordered partition, conjugated by a random
/// unitary frame.
template <class R>
BlockCharacter random_block_character(Index n, R& rng, bool with_frame = true) {
  const Partition p = random_partition(n, rng);
  if (with_frame) return make_block_character(n, p, random_unitary(n, rng));
  return make_block_character(n, p);
}

/// Random (block size, multiplicity) layout with sum k*m = n.
template <class R>
MultiplicityStructure random_multiplicity_structure(Index n, R& rng) {
  MultiplicityStructure s;
  Index left = n;
  while (left > 0) {
    const Index k = std::uniform_int_distribution<Index>(1, left)(rng);
    const Index m = std::uniform_int_distribution<Index>(1, left / k)(rng);
    s.blocks.push_back({k, m});
    left -= k * m;
  }
  return s;
}

/// A *-subalgebra with nontrivial structure: generated by a random element
/// of a conjugated multiplicity algebra.
template <class R>
StarAlgebra random_structured_algebra(Index n, R& rng) {
  const StarAlgebra host = multiplicity_algebra(random_multiplicity_structure(n, rng), random_unitary(n, rng));
  return generate_star_algebra({random_element(host.basis(), rng)}, n);
}

/// A random unital *-subalgebra of M: block diagonal over a random partition
/// in a random frame when M is full, otherwise the abelian algebra generated
/// by a random Hermitian element of M.
template <class R>
StarAlgebra random_subalgebra_of(const StarAlgebra& m, R& rng) {
  const Index n = m.ambient_dim();
  if (m.is_full()) return conjugate(block_diagonal_algebra(n, random_partition(n, rng)), random_unitary(n, rng));
  return generate_star_algebra({hermitian_part(random_element(m.basis(), rng))}, n);
}

struct BijectionTriple {
  StarAlgebra m;
  StarAlgebra d;
  PositiveFunctional tau;
  ComplexMatrix h;  // in D' cap M, positive, E_D(h) = 1
};

/// h = g^{-1} y with y random positive in D' cap M and g = E_D(y) in Z(D).
template <class R>
BijectionTriple random_bijection_triple(Index n, R& rng) {
  StarAlgebra m = StarAlgebra::full(n);
  StarAlgebra d = conjugate(block_diagonal_algebra(n, random_partition(n, rng)), random_unitary(n, rng));
  PositiveFunctional tau = PositiveFunctional::tracial(n);
  const StarAlgebra rel = commutant(d, m);
  const ComplexMatrix y = hermitian_part(rel.project(random_density(n, rng, 0.05)));
  const ConditionalExpectation ed = preserving_expectation(tau, d, m);
  const ComplexMatrix g = hermitian_part(ed(y));
  const ComplexMatrix gmh = herm_funcalc(g, ScalarFunction::pow(-0.5));
  const ComplexMatrix h = hermitian_part(gmh * y * gmh);
  return {std::move(m), std::move(d), std::move(tau), h};
}

}  // namespace ncrep
