#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pumpline/bands.hpp"
#include "pumpline/chern.hpp"
#include "pumpline/potential.hpp"

using namespace pumpline;

TEST_CASE("free particle: consecutive band edges coincide (touching)") {
  PotentialSpec free_spec;  // V = 0; bands touch at E = (n pi / L)^2
  const auto bands = band_edges(free_spec, 0.0, 42.0, 2);
  REQUIRE(bands.size() >= 2);
  for (std::size_t i = 0; i + 1 < bands.size(); ++i) {
    REQUIRE(bands[i + 1].E_lo - bands[i].E_hi <= 1e-6);
  }
  // touch points at (n pi)^2
  REQUIRE(bands[0].E_hi == Catch::Approx(kPi * kPi).margin(1e-4));
  REQUIRE(bands[1].E_hi == Catch::Approx(4.0 * kPi * kPi).margin(1e-4));
}

TEST_CASE("sliding cosine: edges independent of s") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const auto b0 = band_edges(spec, 0.0, 42.0, 2);
  for (double s : {0.3, 0.71}) {
    const auto bs = band_edges(spec, s, 42.0, 2);
    REQUIRE(bs.size() == b0.size());
    for (std::size_t i = 0; i < b0.size(); ++i) {
      REQUIRE(std::abs(bs[i].E_lo - b0[i].E_lo) <= 1e-8);
      REQUIRE(std::abs(bs[i].E_hi - b0[i].E_hi) <= 1e-8);
    }
  }
  // frozen reference values for the first gap
  REQUIRE(b0[0].E_hi == Catch::Approx(8.85709895).margin(1e-6));
  REQUIRE(b0[1].E_lo == Catch::Approx(10.85677820).margin(1e-6));
}

TEST_CASE("two_harmonic_pump edges match plane-wave eigenvalues at k = 0, pi/L") {
  const auto spec = two_harmonic_pump();
  const auto bands = band_edges(spec, 0.0, 95.0, 3);
  REQUIRE(bands.size() >= 3);
  // periodic eigenvalues (k = 0) give edges where D = +2, antiperiodic (k = pi/L)
  // where D = -2; lowest few: band1 = [ev0_1, evpi_1], band2 = [evpi_2, ev0_2], ...
  const auto H0 = bloch_hamiltonian(spec, 0.0, 0.0, 12);
  const auto Hpi = bloch_hamiltonian(spec, kPi / spec.L, 0.0, 12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es0(H0), espi(Hpi);
  const auto ev0 = es0.eigenvalues();
  const auto evpi = espi.eigenvalues();
  REQUIRE(bands[0].E_lo == Catch::Approx(ev0[0]).margin(1e-6));
  REQUIRE(bands[0].E_hi == Catch::Approx(evpi[0]).margin(1e-6));
  REQUIRE(bands[1].E_lo == Catch::Approx(evpi[1]).margin(1e-6));
  REQUIRE(bands[1].E_hi == Catch::Approx(ev0[1]).margin(1e-6));
  REQUIRE(bands[2].E_lo == Catch::Approx(ev0[2]).margin(1e-6));
}

TEST_CASE("band edges increase strictly with band index") {
  const auto spec = two_harmonic_pump();
  const auto bands = band_edges(spec, 0.25, 95.0, 3);
  for (std::size_t i = 0; i < bands.size(); ++i) {
    REQUIRE(bands[i].E_lo < bands[i].E_hi);
    if (i + 1 < bands.size()) REQUIRE(bands[i].E_hi <= bands[i + 1].E_lo);
  }
}

TEST_CASE("certify_gap: free particle has no gap") {
  PotentialSpec free_spec;
  REQUIRE_THROWS_AS(certify_gap(free_spec, 5.0), GapClosureError);
}

TEST_CASE("certify_gap: sliding cosine first gap") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const double EF = 0.5 * (8.85709895 + 10.85677820);
  const auto cert = certify_gap(spec, EF);
  REQUIRE(cert.n == 1);
  REQUIRE(cert.disc_sign == -1);
  REQUIRE(cert.margin > 0.0);
  REQUIRE(cert.s_grid_size == 64);
}

TEST_CASE("certify_gap: below the spectrum") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const auto cert = certify_gap(spec, -3.0);  // E_F = -3 < min V = -2
  REQUIRE(cert.n == 0);
  REQUIRE(cert.disc_sign == +1);
}

TEST_CASE("certify_gap: grid stability") {
  const auto spec = two_harmonic_pump();
  const double EF = 39.314618;
  const auto c1 = certify_gap(spec, EF, 64);
  const auto c2 = certify_gap(spec, EF, 128);
  REQUIRE(c1.n == c2.n);
  REQUIRE(c1.n == 2);
  REQUIRE(c1.disc_sign == +1);
  REQUIRE(std::abs(c1.margin - c2.margin) <= 1e-6 * std::max(1.0, std::abs(c1.margin)));
}

TEST_CASE("certify_gap rejects too-coarse s grid") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  REQUIRE_THROWS_AS(certify_gap(spec, 9.8569, 8), ConfigError);
}

TEST_CASE("band_edges shortfall error") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  REQUIRE_THROWS_AS(band_edges(spec, 0.0, 5.0, 3), ConfigError);
}

TEST_CASE("common_gap intervals") {
  const auto spec = sliding_cosine(2.0, 1.0, 1.0);
  const auto gap1 = common_gap(spec, 1, 42.0);
  REQUIRE(gap1.E_lo == Catch::Approx(8.85709895).margin(1e-5));
  REQUIRE(gap1.E_hi == Catch::Approx(10.85677820).margin(1e-5));
  const auto spec2 = two_harmonic_pump();
  const auto gap2 = common_gap(spec2, 2, 95.0);
  REQUIRE(gap2.E_lo == Catch::Approx(31.8385).margin(2e-3));
  REQUIRE(gap2.E_hi == Catch::Approx(46.7907).margin(2e-3));
}
