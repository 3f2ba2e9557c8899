#include "test_main.hpp"

#include <cmath>
#include <numbers>

#include "neckscope/warped_geometry.hpp"

using namespace neckscope;
using std::numbers::pi;

namespace {

double flare_phi(double s, double t) { return s * t + (1 - s) * (1 - std::exp(-t)); }

Point random_point(const WarpedMetric& m, Rng& rng, double lo, double hi) {
  Eigen::VectorXd th(m.n());
  for (int k = 0; k < m.n(); ++k) th(k) = rng.normal();
  return make_point(m, rng.uniform(lo, hi), th);
}

}  // namespace

TEST_CASE("preset warps evaluate to their closed forms") {
  const WarpedMetric cyl = make_metric(cylinder_spec(1.0));
  for (double t : {-9.0, -1.0, 0.0, 3.5, 9.9}) {
    CHECK(cyl.phi(t) == 1.0);
    CHECK(cyl.dphi(t) == 0.0);
  }
  const WarpedMetric sph = make_metric(sphere_spec(2.0));
  CHECK(sph.t_max() == doctest::Approx(2 * pi));
  for (double t : {0.1, 1.0, 3.0, 6.0}) CHECK(sph.phi(t) == doctest::Approx(2 * std::sin(t / 2)));
}

TEST_CASE("sampled warp reproduces a cone away from the ends") {
  const int N = 200;
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(N, 1.0, 20.0);
  Eigen::VectorXd p = 0.5 * t;
  const WarpedMetric m = make_metric(sampled_spec(t, p));
  for (double x = 2.0; x < 19.0; x += 0.37) CHECK(std::abs(m.phi(x) - 0.5 * x) < 1e-6);
}

TEST_CASE("sampled warp rejects tiny grids and nonpositive interiors") {
  Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 1.0, 2.0);
  CHECK_THROWS_AS(sampled_spec(t, t), Error);
  Eigen::VectorXd t2 = Eigen::VectorXd::LinSpaced(10, 0.0, 3.0);
  Eigen::VectorXd p2 = t2.array() - 1.5;
  try {
    make_metric(sampled_spec(t2, p2));
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidSpec);
  }
}

TEST_CASE("flare sigma must lie in (0,1)") {
  CHECK_THROWS_AS(make_metric(flare_spec(1.0)), Error);
  CHECK_THROWS_AS(make_metric(flare_spec(0.0)), Error);
}

TEST_CASE("jet derivatives agree with finite differences") {
  for (const WarpSpec& s : {flare_spec(0.3), dumbbell_spec(0.8), sphere_spec(1.5)}) {
    const WarpedMetric m = make_metric(s);
    for (double t : {0.4, 1.1, 2.3}) {
      const double h = 1e-5;
      const double fd1 = (m.phi(t + h) - m.phi(t - h)) / (2 * h);
      const double fd2 = (m.dphi(t + h) - m.dphi(t - h)) / (2 * h);
      CHECK(std::abs(m.dphi(t) - fd1) <= 1e-8 * std::max(1.0, std::abs(fd1)));
      CHECK(std::abs(m.d2phi(t) - fd2) <= 1e-8 * std::max(1.0, std::abs(fd2)));
    }
  }
}

TEST_CASE("curvature of flat, cylinder and sphere") {
  const auto f = curvature_at(make_metric(flat_spec()), 2.0);
  CHECK(f.K_rad == 0.0);
  CHECK(f.K_sph == 0.0);
  CHECK(f.R == 0.0);
  const auto c = curvature_at(make_metric(cylinder_spec(1.0)), 0.3);
  CHECK(c.K_rad == 0.0);
  CHECK(c.K_sph == 1.0);
  CHECK(c.R == 2.0);
  const WarpedMetric sph = make_metric(sphere_spec(2.0));
  for (double t : {0.0, 1e-6, 1e-4, 0.5, 3.0, 2 * pi - 1e-5, 2 * pi}) {
    const auto k = curvature_at(sph, t);
    CHECK(k.K_rad == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(k.K_sph == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(k.R == doctest::Approx(2 * (2 * k.K_rad + k.K_sph)));
  }
  CHECK_THROWS_AS(curvature_at(sph, 7.0), Error);
}

TEST_CASE("flare curvature matches hand formulas and stays positive") {
  const double s = 0.3;
  const WarpedMetric m = make_metric(flare_spec(s));
  for (double t = 0.05; t < 50; t *= 1.7) {
    const double p = flare_phi(s, t);
    const double dp = s + (1 - s) * std::exp(-t);
    const auto k = curvature_at(m, t);
    CHECK(k.K_rad == doctest::Approx((1 - s) * std::exp(-t) / p).epsilon(1e-10));
    CHECK(k.K_sph == doctest::Approx((1 - dp * dp) / (p * p)).epsilon(1e-9));
    CHECK(k.K_rad > 0);
    CHECK(k.K_sph > 0);
    CHECK(std::max(k.K_rad, k.K_sph) <= k.R);
  }
}

TEST_CASE("general-dimension scalar curvature") {
  const WarpedMetric m = make_metric(sphere_spec(1.0, 5));
  const auto k = curvature_at(m, 1.0);
  CHECK(k.R == doctest::Approx(20.0));  // n(n-1) for the unit 5-sphere
  CHECK(k.ricci.size() == 5);
  CHECK(k.ricci(0) == doctest::Approx(4.0));
}

TEST_CASE("distance examples") {
  const WarpedMetric flat = make_metric(flat_spec());
  CHECK(distance(flat, meridian_point(flat, 1, 0), meridian_point(flat, 2, 0)) ==
        doctest::Approx(1.0));
  const WarpedMetric cyl = make_metric(cylinder_spec(1.5));
  const Point p = meridian_point(cyl, 0.0, 0.0), q = meridian_point(cyl, 2.0, 1.2);
  const double expect = std::hypot(2.0, 1.5 * 1.2);
  CHECK(distance(cyl, p, q) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(distance_info(cyl, p, q, false).length == doctest::Approx(expect).epsilon(1e-7));
  const WarpedMetric sph = make_metric(sphere_spec(1.0));
  const Point a = meridian_point(sph, 0.7, 0.0), b = meridian_point(sph, pi - 0.7, pi);
  CHECK(distance(sph, a, b) == doctest::Approx(pi).epsilon(1e-12));
  CHECK(distance_info(sph, a, b, false).length == doctest::Approx(pi).epsilon(1e-6));
}

TEST_CASE("shooting agrees with closed forms") {
  Rng rng(11);
  const WarpedMetric flat = make_metric(flat_spec());
  const WarpedMetric sph = make_metric(sphere_spec(1.3));
  for (int i = 0; i < 40; ++i) {
    const Point p = random_point(flat, rng, 0.2, 5), q = random_point(flat, rng, 0.2, 5);
    const double ex = distance(flat, p, q);
    CHECK(distance_info(flat, p, q, false).length == doctest::Approx(ex).epsilon(1e-6));
    const Point s1 = random_point(sph, rng, 0.1, 3.9), s2 = random_point(sph, rng, 0.1, 3.9);
    const double es = distance(sph, s1, s2);
    CHECK(distance_info(sph, s1, s2, false).length == doctest::Approx(es).epsilon(1e-6));
  }
}

TEST_CASE("triangle inequality on shooting presets") {
  Rng rng(5);
  for (const WarpSpec& s : {flare_spec(0.3), dumbbell_spec(0.8)}) {
    const WarpedMetric m = make_metric(s);
    const double hi = std::isfinite(m.t_max()) ? m.t_max() - 0.05 : 12.0;
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const Point p = random_point(m, rng, 0.05, hi), q = random_point(m, rng, 0.05, hi),
                  r = random_point(m, rng, 0.05, hi);
      if (distance(m, p, r) > distance(m, p, q) + distance(m, q, r) + 1e-5) {
        ++violations;
        MESSAGE(family_name(s.family), " ", p.t, " ", q.t, " ", r.t, " ", sphere_angle(p.theta, r.theta), " ", sphere_angle(p.theta, q.theta), " ", sphere_angle(q.theta, r.theta), " ", distance(m, p, r), " ", distance(m, p, q), " ", distance(m, q, r));
      }
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("distance scales with the homothety") {
  Rng rng(3);
  const WarpedMetric m = make_metric(flare_spec(0.3));
  const double lam = 3.0;
  const WarpedMetric ms = make_metric(scaled(flare_spec(0.3), lam));
  for (int i = 0; i < 30; ++i) {
    const Point p = random_point(m, rng, 0.1, 8), q = random_point(m, rng, 0.1, 8);
    const Point ps{lam * p.t, p.theta}, qs{lam * q.t, q.theta};
    CHECK(distance(ms, ps, qs) == doctest::Approx(lam * distance(m, p, q)).epsilon(1e-6));
  }
}

TEST_CASE("geodesic shoot examples") {
  const WarpedMetric flat = make_metric(flat_spec());
  const Point p = meridian_point(flat, 2.0, 0.0);
  const auto e = geodesic_shoot(flat, p, Tangent{1.0, Eigen::VectorXd::Zero(3)}, 1.5);
  CHECK(e.point.t == doctest::Approx(3.5));

  const double c = 0.7;
  const WarpedMetric cyl = make_metric(cylinder_spec(c, -10, 10));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(3);
  w(1) = 1.0 / c;
  const auto loop = geodesic_shoot(cyl, meridian_point(cyl, 0.0, 0.0), Tangent{0.0, w}, 2 * pi * c);
  CHECK(loop.point.t == doctest::Approx(0.0).epsilon(1e-9));
  CHECK((loop.point.theta - p.theta).norm() < 1e-8);

  const WarpedMetric fl = make_metric(flare_spec(0.5));
  const Point s = meridian_point(fl, 1.0, 0.0);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
  const double psi = 1.1;
  v(1) = std::sin(psi) / fl.phi(1.0);
  const double len = 20.0;
  const auto g = geodesic_shoot(fl, s, Tangent{std::cos(psi), v}, len);
  CHECK(std::abs(g.clairaut_end - g.clairaut_start) / g.clairaut_start <= 1e-9 * len);
}

TEST_CASE("leaving the domain is reported") {
  const WarpedMetric cyl = make_metric(cylinder_spec(1.0, 0, 5));
  try {
    geodesic_shoot(cyl, meridian_point(cyl, 1.0, 0.0), Tangent{1.0, Eigen::VectorXd::Zero(3)}, 10);
    FAIL("expected ExitedDomain");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ExitedDomain);
  }
}

TEST_CASE("ball volumes") {
  CHECK(ball_volume(make_metric(flat_spec()), 1.0) == doctest::Approx(4 * pi / 3).epsilon(1e-10));
  try {
    ball_volume(make_metric(cylinder_spec(1.0)), 1.0);
    FAIL("expected RequiresPole");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RequiresPole);
  }
  const double s = 0.3;
  const WarpedMetric fl = make_metric(flare_spec(s));
  const double r = 1e5;
  CHECK(ball_volume(fl, r) / (r * r * r) == doctest::Approx(4 * pi * s * s / 3).epsilon(1e-3));
}

TEST_CASE("annulus Monte Carlo") {
  const WarpedMetric flat = make_metric(flat_spec());
  const auto e = annulus_volume_mc(flat, meridian_point(flat, 0.0, 0.0), 1.0, 2.0, 20000, 7);
  CHECK(std::abs(e.value - 28 * pi / 3) <= 3 * e.stderr_);

  // One-sided cylinder with Q on the end slice: the product-metric oracle.
  const WarpedMetric cyl = make_metric(cylinder_spec(1.0, 0.0, 200.0));
  const double R1 = 20, R2 = 30;
  const auto ce = annulus_volume_mc(cyl, meridian_point(cyl, 0.0, 0.0), R1, R2, 20000, 9);
  const double oracle = integrate(
      [&](double d) {
        return 2 * pi * std::sin(d) * (std::sqrt(R2 * R2 - d * d) - std::sqrt(R1 * R1 - d * d));
      },
      0.0, pi, 1e-12);
  CHECK(std::abs(ce.value - oracle) <= 3 * ce.stderr_);
  CHECK(oracle == doctest::Approx(4 * pi * (R2 - R1)).epsilon(0.01));

  try {
    annulus_volume_mc(flat, meridian_point(flat, 0.0, 0.0), 2.0, 1.0, 2000);
    FAIL("expected InvalidRange");
  } catch (const Error& e2) {
    CHECK(e2.code() == Errc::InvalidRange);
  }
}

TEST_CASE("Monte Carlo output is deterministic for a seed") {
  const WarpedMetric fl = make_metric(flare_spec(0.3));
  const Point Q = meridian_point(fl, 3.0, 0.0);
  const auto a = annulus_volume_mc(fl, Q, 2.0, 4.0, 4000, 21, 1);
  const auto b = annulus_volume_mc(fl, Q, 2.0, 4.0, 4000, 21, 3);
  CHECK(a.value == b.value);
  CHECK(a.stderr_ == b.stderr_);
}
