#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "fracflow/norms.hpp"
#include "fracflow/rng.hpp"

using namespace fracflow;

namespace {

std::vector<double> mode(std::size_t n, int k, double amp = 1.0,
                         double phase = 0.0) {
  std::vector<double> u(n);
  for (std::size_t j = 0; j < n; ++j)
    u[j] = amp * std::cos(k * two_pi * static_cast<double>(j) /
                              static_cast<double>(n) +
                          phase);
  return u;
}

}  // namespace

TEST_CASE("holder seminorm of single modes") {
  // the chordal Lipschitz constant of cos is sup|sin| = 1
  const double a = holder_seminorm(mode(512, 1), 1.0);
  REQUIRE(std::abs(a - 1.0) < 1e-3);
  // chain rule: the k-th mode scales the constant by k
  const double b = holder_seminorm(mode(512, 8), 1.0);
  REQUIRE(std::abs(b - 8.0 * a) / (8.0 * a) < 1e-2);

  REQUIRE(holder_seminorm(std::vector<double>(64, 2.5), 0.5) == 0.0);
  REQUIRE_THROWS_AS(holder_seminorm(mode(64, 1), 0.0), DomainError);
  REQUIRE_THROWS_AS(holder_seminorm(mode(64, 1), 1.2), DomainError);
  REQUIRE_THROWS_AS(holder_seminorm(std::vector<double>(100, 1.0), 0.5),
                    SizeError);
}

TEST_CASE("iterated tangential norms of the first mode") {
  const auto u = mode(256, 1);
  // hand values on the unit circle: |grad| = |u'|, |D^2|_F = sqrt(u''^2+u'^2),
  // |D^3|_F^2 = (u'''-u')^2 + 5u''^2 + u'^2, all constant for cos
  REQUIRE(std::abs(ck_beta_norm(u, 0, 0.0) - 1.0) < 1e-12);
  REQUIRE(std::abs(ck_beta_norm(u, 1, 0.0) - 2.0) < 1e-12);
  REQUIRE(std::abs(ck_beta_norm(u, 2, 0.0) - 3.0) < 1e-9);
  REQUIRE(std::abs(ck_beta_norm(u, 3, 0.0) - (3.0 + std::sqrt(5.0))) < 1e-8);
}

TEST_CASE("single-mode pattern of the first-order norm") {
  for (int k : {2, 4, 8}) {
    const auto v = mode(256, k, 0.01);
    const double want = 0.01 * (1.0 + k);
    REQUIRE(std::abs(ck_beta_norm(v, 1, 0.0) - want) / want < 0.05);
  }
}

TEST_CASE("zero-order norm splits into sup plus seminorm") {
  const auto w = mode(128, 3, 0.7, 0.3);
  double sup = 0.0;
  for (double v : w) sup = std::max(sup, std::abs(v));
  REQUIRE(ck_beta_norm(w, 0, 0.6) == sup + holder_seminorm(w, 0.6));
  // monotone in the derivative order
  REQUIRE(ck_beta_norm(w, 0, 0.0) <= ck_beta_norm(w, 1, 0.0));
  REQUIRE(ck_beta_norm(w, 1, 0.0) <= ck_beta_norm(w, 2, 0.0));
  // constants carry only the sup term
  REQUIRE(std::abs(ck_beta_norm(std::vector<double>(64, 1.0), 2, 0.5) - 1.0) <
          1e-12);
}

TEST_CASE("unresolved content is rejected") {
  REQUIRE_THROWS_AS(ck_beta_norm(mode(64, 20), 1, 0.0), ResolutionError);
  REQUIRE(ck_beta_norm(mode(64, 15), 0, 0.0) > 0.0);
  REQUIRE_THROWS_AS(ck_beta_norm(mode(64, 1), 1, 1.0), DomainError);
  REQUIRE_THROWS_AS(ck_beta_norm(mode(64, 1), -1, 0.0), DomainError);
  REQUIRE_THROWS_AS(ck_beta_norm(mode(64, 1), 7, 0.0), DomainError);
}

TEST_CASE("dyadic bumps form a partition of unity") {
  REQUIRE(paley_eta(1.0) == 1.0);
  REQUIRE(paley_eta(2.0) == 0.0);
  REQUIRE(paley_eta(1.5) == 0.5);
  REQUIRE(paley_delta(1.0) == 1.0);
  for (int k = 1; k <= 128; ++k) {
    double sum = 0.0;
    for (int j = 0; j <= 10; ++j) sum += paley_delta(std::pow(2.0, -j) * k);
    REQUIRE(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("paley blocks select dyadic annuli") {
  const std::size_t n = 256;
  const auto u = mode(n, 32);
  const auto keep = paley_block(u, 5);  // frequency 2^5 sits on the plateau
  const auto kill = paley_block(u, 3);  // two octaves out of band
  for (std::size_t i = 0; i < n; ++i) {
    REQUIRE(std::abs(keep[i] - u[i]) < 1e-12);
    REQUIRE(std::abs(kill[i]) < 1e-12);
  }

  Rng rng(5);
  const auto v = random_trig_samples(n, rng, 1, 60, 1.2);
  const auto pb = build_paley_blocks(v);
  REQUIRE(pb.j_min == 0);
  REQUIRE(pb.j_max == 7);
  std::vector<double> rec(n, 0.0);
  for (const auto& b : pb.blocks)
    for (std::size_t i = 0; i < n; ++i) rec[i] += b[i];
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    REQUIRE(std::abs(rec[i] - (v[i] - mean)) < 1e-10);
}

TEST_CASE("dyadic holder norm on single modes") {
  const std::size_t n = 256;
  REQUIRE(fourier_holder_norm(std::vector<double>(n, 3.0), 0.5) == 0.0);
  const double v = fourier_holder_norm(mode(n, 32), 0.5);
  REQUIRE(std::abs(v - std::pow(2.0, 2.5)) < 1e-8);
  REQUIRE_THROWS_AS(fourier_holder_norm(mode(n, 2), 1.0), DomainError);
  REQUIRE_THROWS_AS(fourier_holder_norm(mode(n, 2), 2.5), DomainError);
}

TEST_CASE("dyadic and direct holder norms are equivalent on a corpus") {
  double lo128 = 1e300, hi128 = 0.0, lo256 = 1e300, hi256 = 0.0;
  for (int c = 0; c < 10; ++c) {
    for (std::size_t n : {128u, 256u}) {
      Rng rng(100 + c);
      const auto u = random_trig_samples(n, rng, 2, 30, 1.5);
      const double r = fourier_holder_norm(u, 1.5) / ck_beta_norm(u, 1, 0.5);
      REQUIRE(r > 1.0 / 50.0);
      REQUIRE(r < 50.0);
      (n == 128 ? lo128 : lo256) = std::min(n == 128 ? lo128 : lo256, r);
      (n == 128 ? hi128 : hi256) = std::max(n == 128 ? hi128 : hi256, r);
    }
  }
  // the fitted band is stable under refinement
  REQUIRE(std::abs(hi256 - hi128) / hi128 < 0.3);
  REQUIRE(std::abs(lo256 - lo128) / lo128 < 0.3);
}

TEST_CASE("interpolation ratio behaves across the corpus") {
  const std::size_t n = 256;
  REQUIRE(std::abs(interpolation_check(std::vector<double>(n, 1.0), 0.5, 1.5,
                                       0.5) -
                   1.0) < 1e-12);
  const double r = interpolation_check(mode(n, 1), 0.5, 1.5, 0.5);
  REQUIRE(r > 0.1);
  REQUIRE(r <= 10.0);

  double worst128 = 0.0, worst256 = 0.0;
  for (int c = 0; c < 50; ++c) {
    Rng r1(300 + c), r2(300 + c);
    worst128 = std::max(
        worst128,
        interpolation_check(random_trig_samples(128, r1, 1, 25, 1.3), 0.5, 2.5,
                            0.4));
    worst256 = std::max(
        worst256,
        interpolation_check(random_trig_samples(256, r2, 1, 25, 1.3), 0.5, 2.5,
                            0.4));
  }
  REQUIRE(std::abs(worst256 - worst128) / worst128 < 0.2);

  REQUIRE_THROWS_AS(
      interpolation_check(std::vector<double>(n, 0.0), 0.5, 1.5, 0.5),
      DegenerateInputError);
  REQUIRE_THROWS_AS(interpolation_check(mode(n, 1), -0.5, 1.5, 0.5),
                    DomainError);
  REQUIRE_THROWS_AS(interpolation_check(mode(n, 1), 0.5, 1.5, 0.0),
                    DomainError);
}

TEST_CASE("seminorm never decreases under refinement") {
  for (int seed : {9, 21, 33}) {
    Rng r1(seed), r2(seed);
    const auto coarse = random_trig_samples(128, r1, 1, 20, 1.0);
    const auto fine = random_trig_samples(256, r2, 1, 20, 1.0);
    REQUIRE(holder_seminorm(fine, 0.7) >= holder_seminorm(coarse, 0.7) - 1e-15);
  }
}

TEST_CASE("norm tables serialize as csv") {
  const std::string csv = norm_table_csv(
      {{"wavy", "c1_beta", 2.25, 128}, {"wavy", "fourier_holder", 1.5, 128}});
  REQUIRE(csv.find("function,norm,value,N\n") == 0);
  REQUIRE(csv.find("wavy,c1_beta,2.25,128\n") != std::string::npos);
  REQUIRE(csv.find("wavy,fourier_holder,1.5,128\n") != std::string::npos);
}
