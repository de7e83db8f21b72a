#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "pumpline/bands.hpp"
#include "pumpline/chern.hpp"
#include "pumpline/potential.hpp"
#include "pumpline/transfer.hpp"

using namespace pumpline;

namespace {

PotentialSpec static_cosine(double V0) {  // s-independent single harmonic
  PotentialSpec spec;
  HarmonicTerm t;
  t.m = 1;
  t.kind = HarmonicTerm::Kind::Cos;
  t.coeff.c0 = V0;
  spec.terms = {t};
  return spec;
}

}  // namespace

TEST_CASE("bloch_hamiltonian: free particle is diagonal") {
  PotentialSpec free_spec;
  const auto H = bloch_hamiltonian(free_spec, 0.7, 0.0, 4);
  for (int i = 0; i < H.rows(); ++i)
    for (int j = 0; j < H.cols(); ++j) {
      if (i == j) {
        const int m = i - 4;
        REQUIRE(H(i, i).real() ==
                Catch::Approx(sqr(0.7 + 2.0 * kPi * m)).margin(1e-12));
      } else {
        REQUIRE(std::abs(H(i, j)) == 0.0);
      }
    }
}

TEST_CASE("bloch_hamiltonian: cosine potential is tridiagonal with V0/2") {
  const auto spec = static_cosine(2.0);
  const auto H = bloch_hamiltonian(spec, 0.3, 0.1, 5);
  for (int i = 0; i < H.rows(); ++i)
    for (int j = 0; j < H.cols(); ++j) {
      if (std::abs(i - j) == 1)
        REQUIRE(std::abs(H(i, j) - cplx(1.0, 0.0)) <= 1e-13);
      else if (i != j)
        REQUIRE(std::abs(H(i, j)) <= 1e-13);
    }
  // Hermiticity
  REQUIRE((H - H.adjoint()).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("bloch_hamiltonian enforces the cutoff precondition") {
  const auto spec = two_harmonic_pump();  // max harmonic 2
  REQUIRE_THROWS_AS(bloch_hamiltonian(spec, 0.0, 0.0, 3), ConfigError);
}

TEST_CASE("plane-wave eigenvalues agree with the discriminant bands") {
  // at fixed (k, s), every E in a band with 2 cos(kL) = D(E) is an eigenvalue
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const double s = 0.21;
  const double k = 1.3;  // in (0, 2 pi / L)
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(bloch_hamiltonian(spec, k, s, 12));
  const auto ev = es.eigenvalues();
  const double target = 2.0 * std::cos(k * spec.L);
  // scan D(E) - 2 cos kL for roots below 40 and match each against an eigenvalue
  const double E0 = min_potential(spec, s) - 1.0;
  const double E1 = 60.0;
  const int n = 2400;
  double prev = discriminant(spec, E0, s) - target;
  int matched = 0;
  for (int i = 1; i <= n; ++i) {
    const double E = E0 + (E1 - E0) * (double)i / (double)n;
    const double cur = discriminant(spec, E, s) - target;
    if (prev * cur < 0.0) {
      double a = E0 + (E1 - E0) * (double)(i - 1) / (double)n, b = E;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (a + b);
        const double fm = discriminant(spec, m, s) - target;
        if ((prev <= 0) == (fm <= 0)) a = m;
        else b = m;
      }
      const double root = 0.5 * (a + b);
      double best = 1e9;
      for (int q = 0; q < ev.size(); ++q) best = std::min(best, std::abs(ev[q] - root));
      REQUIRE(best <= 1e-6);
      ++matched;
    }
    prev = cur;
  }
  REQUIRE(matched >= 3);
}

TEST_CASE("s-independent potential has zero Chern numbers") {
  const auto spec = static_cosine(2.0);
  const double EF = 0.5 * (8.85709895 + 10.85677820);  // same bands as the sliding pump
  const auto cert = certify_gap(spec, EF);
  const auto res = chern_numbers(spec, 1, cert, 16, 16, 8);
  REQUIRE(res.per_band.size() == 1);
  REQUIRE(res.per_band[0] == 0);
  REQUIRE(res.total == 0);
}

TEST_CASE("total curvature over all bands of the truncated matrix vanishes") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const int M_pw = 3;  // small cutoff: include every band of the finite matrix
  const int dim = 2 * M_pw + 1;
  const auto grid = compute_bloch_grid(spec, dim, 12, 12, M_pw);
  // full filling: the shift gluing is singular, use the naive periodic torus
  const auto res = chern_from_grid(grid, /*glue_shift=*/false);
  REQUIRE(res.total == 0);
}

TEST_CASE("sliding cosine lowest band has c1 = 1") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const double EF = 0.5 * (8.85709895 + 10.85677820);
  const auto cert = certify_gap(spec, EF);
  const auto res = chern_numbers(spec, 1, cert, 24, 24, 12);
  REQUIRE(res.per_band == std::vector<int>{1});
  REQUIRE(res.total == 1);
  REQUIRE(res.plaquette_residual < kPi / 2.0);
}

TEST_CASE("two_harmonic_pump filled pair has (c1, c2) = (0, 1)") {
  const auto spec = two_harmonic_pump();
  const auto cert = certify_gap(spec, 39.314618);
  const auto res = chern_numbers(spec, 2, cert, 24, 24, 12);
  REQUIRE(res.per_band == std::vector<int>{0, 1});
  REQUIRE(res.total == 1);
}

TEST_CASE("integer stability under grid doubling and cutoff increase") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const double EF = 0.5 * (8.85709895 + 10.85677820);
  const auto cert = certify_gap(spec, EF);
  const auto a = chern_numbers(spec, 1, cert, 24, 24, 12);
  const auto b = chern_numbers(spec, 1, cert, 48, 48, 12);
  const auto c = chern_numbers(spec, 1, cert, 24, 24, 16);
  REQUIRE(a.per_band == b.per_band);
  REQUIRE(a.per_band == c.per_band);
}

TEST_CASE("gauge invariance: random rephasing leaves Chern numbers unchanged") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  auto grid = compute_bloch_grid(spec, 1, 16, 16, 8);
  const auto before = chern_from_grid(grid);
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
  for (auto& v : grid.filled) {
    for (int col = 0; col < v.cols(); ++col)
      v.col(col) *= std::exp(cplx(0.0, ang(rng)));
  }
  const auto after = chern_from_grid(grid);
  REQUIRE(before.per_band == after.per_band);
  REQUIRE(before.total == after.total);
}

TEST_CASE("chern_numbers refuses to run without a matching certificate") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const double EF = 0.5 * (8.85709895 + 10.85677820);
  const auto cert = certify_gap(spec, EF);  // gap index 1
  REQUIRE_THROWS_AS(chern_numbers(spec, 2, cert), GapClosureError);
}

TEST_CASE("eigenvectors on the grid are normalized") {
  const auto spec = two_harmonic_pump();
  const auto grid = compute_bloch_grid(spec, 2, 8, 8, 8);
  for (const auto& v : grid.filled)
    for (int col = 0; col < v.cols(); ++col)
      REQUIRE(std::abs(v.col(col).norm() - 1.0) <= 1e-12);
  for (const auto& ev : grid.energies)
    for (int i = 0; i + 1 < ev.size(); ++i) REQUIRE(ev[i] <= ev[i + 1]);
}
