#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "fracflow/kernels.hpp"

using namespace fracflow;

namespace {

HeightField circle_field(std::size_t n, double radius = 1.0) {
  return build_field(std::vector<double>(n, radius));
}

HeightField wavy_field(std::size_t n, double eps = 0.1, int k = 2) {
  std::vector<double> h(n);
  for (std::size_t j = 0; j < n; ++j)
    h[j] = 1.0 + eps * std::cos(k * two_pi * static_cast<double>(j) /
                                static_cast<double>(n));
  return build_field(h);
}

// discrete C^{1+beta} norm: sup|h| + sup|h'| + chordal Holder seminorm of h'
double c1beta_norm(const HeightField& f, double beta) {
  double sup_h = 0.0, sup_dh = 0.0, semi = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    sup_h = std::max(sup_h, std::abs(f.h[i]));
    sup_dh = std::max(sup_dh, std::abs(f.dh[i]));
    for (std::size_t j = i + 1; j < f.n; ++j) {
      const double d = chord_distance(f.theta[i], f.theta[j]);
      semi = std::max(semi, std::abs(f.dh[i] - f.dh[j]) / std::pow(d, beta));
    }
  }
  return sup_h + sup_dh + semi;
}

// moment of the flat kernel on the unit circle,
//   int |y-x|^{-s} dH(y) = 2^{1-s} sqrt(pi) Gamma((1-s)/2) / Gamma(1-s/2)
double flat_kernel_moment(double s) {
  return std::pow(2.0, 1.0 - s) * std::sqrt(pi) *
         std::tgamma(0.5 * (1.0 - s)) / std::tgamma(1.0 - 0.5 * s);
}

}  // namespace

TEST_CASE("matrix field of round sets is a multiple of the identity") {
  for (double r : {1.0, 2.0}) {
    const auto K = build_matrix_field(circle_field(64, r), 0.5);
    REQUIRE(K.n == 64);
    for (const auto& a : K.A) {
      REQUIRE(std::abs(a.xx - r * r) < 1e-13);
      REQUIRE(std::abs(a.yy - r * r) < 1e-13);
      REQUIRE(std::abs(a.xy) < 1e-13);
    }
    REQUIRE(std::abs(K.lambda - r * r) < 1e-13);
    REQUIRE(std::abs(K.Lambda - r * r) < 1e-13);
    REQUIRE(K.holder_norm > 0.0);
  }
}

TEST_CASE("matrix eigenvalues and ellipticity window") {
  Rng rng(3);
  const auto f = build_field(random_convex_samples(128, rng));
  const auto K = build_matrix_field(f, 0.4);
  for (std::size_t j = 0; j < K.n; ++j) {
    const double h2 = f.h[j] * f.h[j], w = f.dh[j] * f.dh[j];
    // rank-one update of h^2 I: eigenvalues are h^2 and h^2 + h'^2
    const double tr = K.A[j].xx + K.A[j].yy;
    const double det = K.A[j].xx * K.A[j].yy - K.A[j].xy * K.A[j].xy;
    REQUIRE(std::abs(tr - (2.0 * h2 + w)) < 1e-12);
    REQUIRE(std::abs(det - h2 * (h2 + w)) < 1e-12);
    for (int d = 0; d < 32; ++d) {
      const Vec2 xi = circle_point(two_pi * d / 32.0);
      const double q = K.A[j].quad(xi);
      REQUIRE(q >= K.lambda - 1e-12);
      REQUIRE(q <= K.Lambda + 1e-12);
    }
  }
}

TEST_CASE("kernel values on isotropic fields") {
  const double s = 0.5;
  const auto K1 = build_matrix_field(circle_field(64), s);
  const Vec2 x0 = circle_point(K1.source.theta[0]);
  REQUIRE(std::abs(kernel_eval(K1, x0 + Vec2{0.0, 1.0}, 0) - 1.0) < 1e-14);

  const auto K2 = build_matrix_field(circle_field(64, 2.0), s);
  const Vec2 x2 = circle_point(K2.source.theta[5]);
  const double want = std::pow(2.0, -2.5);
  REQUIRE(std::abs(kernel_eval(K2, x2 + Vec2{1.0, 0.0}, 5) - want) < 1e-14);

  // ellipticity bound at random pairs
  Rng rng(13);
  const auto f = build_field(random_convex_samples(128, rng));
  const auto K = build_matrix_field(f, 0.7);
  const double cap = std::pow(K.lambda, -0.5 * (2.0 + 0.7));
  for (int t = 0; t < 1000; ++t) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_int(0, 127));
    const double ay = rng.uniform(0.0, two_pi);
    const double d = chord_distance(ay, f.theta[i]);
    if (d < 1e-8) continue;
    const double k = kernel_eval(K, circle_point(ay), i);
    REQUIRE(k <= cap * std::pow(d, -(2.0 + 0.7)) * (1.0 + 1e-12));
    REQUIRE(k > 0.0);
  }

  REQUIRE_THROWS_AS(kernel_eval(K1, x0, 0), DomainError);
  REQUIRE_THROWS_AS(kernel_eval(K1, Vec2{0.0, 2.0}, 400), SizeError);
}

TEST_CASE("splitting identity holds to machine precision") {
  const double s = 0.5;
  const auto sd = split_data(wavy_field(256), s);
  REQUIRE(sd.max_identity_residual < 1e-12);
  REQUIRE(sd.growth_constant > 0.0);
  REQUIRE(sd.growth_constant < 10.0);
  REQUIRE(sd.increment_constant > 0.0);
  REQUIRE(sd.increment_constant < 10.0);

  // constant fields: the Taylor remainder and the splitting error vanish
  for (double r : {1.0, 1.7}) {
    const auto sc = split_data(circle_field(128, r), s);
    for (int i = 0; i < 12; ++i) {
      const double ax = 0.31 + two_pi * i / 12.0;
      const double ay = ax + 0.9;
      REQUIRE(std::abs(sc.taylor(ay, ax)) < 1e-13);
      REQUIRE(std::abs(sc.g(ay, ax)) < 1e-13);
    }
  }
  REQUIRE_THROWS_AS(split_data(wavy_field(64), 1.2), DomainError);
}

TEST_CASE("taylor remainder obeys the two-exponent bound") {
  const double s = 0.5;
  const auto f = wavy_field(256);
  const auto sd = split_data(f, s);
  for (double beta : {0.0, s + sd.alpha}) {
    const double nrm = c1beta_norm(f, beta);
    double worst = 0.0;
    for (int i = 0; i < 48; ++i) {
      const double ax = two_pi * i / 48.0;
      for (int j = 1; j < 96; ++j) {
        const double ay = ax + two_pi * j / 96.0;
        const double d = chord_distance(ay, ax);
        worst =
            std::max(worst, std::abs(sd.taylor(ay, ax)) / std::pow(d, 1.0 + beta));
      }
    }
    REQUIRE(worst <= nrm);
  }
}

TEST_CASE("splitting error decays with the declared exponent") {
  const double s = 0.5;
  const auto sd = split_data(wavy_field(256), s);
  double lx = 0.0, ly = 0.0, lxx = 0.0, lxy = 0.0;
  int m = 0;
  for (int k = 1; k <= 6; ++k) {
    const double dlo = std::pow(2.0, -k), dhi = 2.0 * dlo;
    double worst = 0.0;
    for (int i = 0; i < 32; ++i) {
      const double ax = two_pi * i / 32.0;
      for (int j = 1; j < 512; ++j) {
        const double ay = ax + two_pi * j / 512.0;
        const double d = chord_distance(ay, ax);
        if (d < dlo || d >= dhi) continue;
        worst = std::max(worst, std::abs(sd.g(ay, ax)));
      }
    }
    REQUIRE(worst > 0.0);
    const double X = std::log(1.5 * dlo), Y = std::log(worst);
    lx += X;
    ly += Y;
    lxx += X * X;
    lxy += X * Y;
    ++m;
  }
  const double slope = (m * lxy - lx * ly) / (m * lxx - lx * lx);
  REQUIRE(slope >= 2.0 + s + sd.alpha - 0.1);
}

TEST_CASE("kernel lemma verifier on the unit circle") {
  const double s = 0.5;
  const auto K = build_matrix_field(circle_field(128), s);
  const auto reports = verify_kernel_lemma(K, 7, 2000);
  REQUIRE(reports.size() == 2);

  REQUIRE(reports[0].lemma == "kernel_bound");
  REQUIRE(reports[0].pass);
  REQUIRE(std::abs(reports[0].empirical_constant - 1.0) < 1e-9);

  // sharp constant of the flat-kernel increment: the supremum of
  // ((1-u)^{-(2+s)} - 1)/u over the admissible offsets u <= 1/2
  const double cexact = 2.0 * (std::pow(2.0, 2.0 + s) - 1.0);
  REQUIRE(reports[1].lemma == "kernel_increment");
  REQUIRE(reports[1].pass);
  REQUIRE(reports[1].empirical_constant <= cexact * 1.0001);
  REQUIRE(reports[1].empirical_constant >= 0.5 * cexact);

  const std::string line = to_jsonl(reports[0]);
  REQUIRE(line.find("\"lemma\":\"kernel_bound\"") != std::string::npos);
  REQUIRE(line.find("\"seed\":7") != std::string::npos);
  REQUIRE(line.find("\"pass\":true") != std::string::npos);
}

TEST_CASE("kernel lemma verifier on a wavy field") {
  const double s = 0.5;
  const auto K = build_matrix_field(wavy_field(128), s);
  const auto reports = verify_kernel_lemma(K, 7, 2000);
  for (const auto& r : reports) {
    REQUIRE(r.pass);
    REQUIRE(std::isfinite(r.empirical_constant));
    REQUIRE(r.empirical_constant > 0.0);
  }
  // condition (i) saturates at the ellipticity floor
  REQUIRE(reports[0].empirical_constant <=
          std::pow(K.lambda, -0.5 * (2.0 + s)) + 1e-9);

  auto broken = K;
  broken.holder_norm = 0.0;
  REQUIRE_THROWS_AS(verify_kernel_lemma(broken), DomainError);
}

TEST_CASE("moment identity of the convolution functional") {
  const double s = 0.5;
  const std::size_t n = 256;
  const auto K = build_matrix_field(circle_field(n), s);

  const auto lhs_x = convolution_functional(
      [](double ay, double ax) {
        return circle_point(ay).x - circle_point(ax).x;
      },
      K);
  const auto lhs_y = convolution_functional(
      [](double ay, double ax) {
        return circle_point(ay).y - circle_point(ax).y;
      },
      K);
  const auto rhs_x = convolution_functional(
      [](double ay, double ax) {
        return -0.5 * circle_point(ax).x *
               norm2(circle_point(ay) - circle_point(ax));
      },
      K);

  const double mom = flat_kernel_moment(s);
  for (std::size_t i = 0; i < n; ++i) {
    const double th = K.source.theta[i];
    // odd-part cancellation: the first moment points along x exactly
    const Vec2 psi{lhs_x.psi[i], lhs_y.psi[i]};
    REQUIRE(std::abs(dot(psi, circle_tangent(th))) < 1e-10);
    REQUIRE(std::abs(lhs_x.psi[i] - rhs_x.psi[i]) < 1e-10);
    // value against the closed-form moment of the flat kernel
    REQUIRE(std::abs(rhs_x.psi[i] + 0.5 * mom * std::cos(th)) < 2e-2);
  }
  REQUIRE(rhs_x.growth_ok);       // |F| ~ d^2 meets the assumed growth
  REQUIRE_FALSE(lhs_x.growth_ok); // |F| ~ d does not, and gets flagged

  const auto zero = convolution_functional(
      [](double, double) { return 0.0; }, K);
  for (double v : zero.psi) REQUIRE(v == 0.0);
  REQUIRE(zero.c_alpha_norm == 0.0);
  REQUIRE(zero.growth_ok);
}

TEST_CASE("product-form functional is stable under refinement") {
  const double s = 0.5;
  double prev = 0.0;
  for (std::size_t n : {128u, 256u}) {
    const auto K = build_matrix_field(circle_field(n), s);
    const auto rep = convolution_functional(
        [](double ay, double ax) { return std::cos(ay) - std::cos(ax); }, K);
    REQUIRE(std::isfinite(rep.c_alpha_norm));
    if (prev > 0.0)
      REQUIRE(std::abs(rep.c_alpha_norm - prev) / prev < 0.1);
    prev = rep.c_alpha_norm;
  }
}

TEST_CASE("error integrands vanish on round sets") {
  const double s = 0.5;
  for (std::size_t n : {128u, 256u}) {
    const auto r = r1_error_terms(circle_field(n), s, 0);
    for (double v : r) REQUIRE(std::abs(v) < 1e-10);
  }
  // off the round set they are finite but no longer zero
  const auto f = wavy_field(256);
  for (int axis : {0, 1}) {
    const auto r = r1_error_terms(f, s, axis);
    double sup = 0.0;
    for (double v : r) sup = std::max(sup, std::abs(v));
    REQUIRE(sup > 0.1);
    REQUIRE(sup < 10.0);
  }
  REQUIRE_THROWS_AS(r1_error_terms(f, s, 2), DomainError);
}

TEST_CASE("interpolation factor has an exact closed-form derivative") {
  const double s = 0.5, q = 0.5 * (2.0 + s);
  const auto f = wavy_field(256);
  const auto K = build_matrix_field(f, s);
  const auto sd = split_data(f, s);
  double worst = 0.0, worst_g = 0.0;
  for (int i = 0; i < 32; ++i) {
    const double ax = two_pi * i / 32.0;
    const SymMat2 a = matrix_at(K, ax);
    const Vec2 x = circle_point(ax);
    const double hx = trig_interpolate(f.coeff, ax);
    for (int j = 1; j < 64; ++j) {
      const double ay = ax + two_pi * j / 64.0;
      const Vec2 y = circle_point(ay);
      const double hy = trig_interpolate(f.coeff, ay);
      const double a2 = a.quad(y - x);
      const double g = sd.g(ay, ax);
      // boundary kernel = matrix kernel times the interpolation factor
      const double ktrue = std::pow(norm2(y * hy - x * hx), -q);
      const double ka = std::pow(a2, -q) * std::pow(1.0 + g / a2, -q);
      worst = std::max(worst, std::abs(ktrue - ka) / ktrue);
      const double d = chord_distance(ay, ax);
      for (double mu : {0.0, 0.5, 1.0})
        worst_g = std::max(worst_g, std::abs(g_mu_factor(a2, g, mu, q)) /
                                        std::pow(d, s + K.holder_alpha));
    }
  }
  REQUIRE(worst < 1e-12);
  REQUIRE(worst_g < 1.0);
  // at mu = 0 the derivative is -q g / a2 exactly
  REQUIRE(g_mu_factor(2.0, 0.3, 0.0, q) == -q * 0.15);
}

TEST_CASE("pullback of the matrix field to the tangent chart") {
  const auto K = build_matrix_field(wavy_field(256), 0.5);
  double worst = 0.0;
  for (int i = -5; i <= 5; ++i) {
    const double xp = 0.12 * i;
    const double at = pullback_matrix(K, xp);
    REQUIRE(at >= K.lambda - 1e-12);
    for (int j = -5; j <= 5; ++j) {
      const double yp = 0.12 * j + 0.03;
      const Vec2 x{xp, std::sqrt(1.0 - xp * xp)};
      const Vec2 y{yp, std::sqrt(1.0 - yp * yp)};
      const SymMat2 a = matrix_at(K, std::atan2(x.y, x.x));
      const double lhs = a.quad(y - x);
      const double rhs =
          at * (yp - xp) * (yp - xp) + pullback_remainder(K, yp, xp);
      worst = std::max(worst, std::abs(lhs - rhs));
    }
  }
  REQUIRE(worst < 1e-12);
  // at the north pole the chart is flat and the pullback is the tangential
  // entry of A on the nose
  REQUIRE(std::abs(pullback_matrix(K, 0.0) - K.A[256 / 4].xx) < 1e-13);
  REQUIRE_THROWS_AS(pullback_matrix(K, 1.0), DomainError);
  REQUIRE_THROWS_AS(pullback_remainder(K, 1.2, 0.0), DomainError);
}
