#include <cmath>
#include <numbers>
#include <vector>

#include "neckscope/neck_analysis.hpp"
#include "neckscope/numerics.hpp"
#include "test_main.hpp"

using namespace neckscope;

namespace {

WarpedMetric sampled_cone(double sigma) {
  Eigen::VectorXd t(40), p(40);
  for (int i = 0; i < 40; ++i) {
    t(i) = 1.0 + 19.0 * i / 39;
    p(i) = sigma * t(i);
  }
  return make_metric(sampled_spec(t, p));
}

// Flare derivatives in t, written out by hand.
struct FlareHand {
  double s;
  double phi(double t) const { return s * t + (1 - s) * (1 - std::exp(-t)); }
  double d1(double t) const { return s + (1 - s) * std::exp(-t); }
  double d2(double t) const { return -(1 - s) * std::exp(-t); }
  double d3(double t) const { return (1 - s) * std::exp(-t); }
  // D^j log phi with D = phi d/dt
  double f1(double t) const { return d1(t); }
  double f2(double t) const { return phi(t) * d2(t); }
  double f3(double t) const { return phi(t) * (d1(t) * d2(t) + phi(t) * d3(t)); }
};

// Set partitions of {1..j} by restricted growth strings.
long count_partitions(int j) {
  std::vector<int> a(j, 0);
  long count = 0;
  auto rec = [&](auto&& self, int i, int mx) -> void {
    if (i == j) {
      ++count;
      return;
    }
    for (int v = 0; v <= mx + 1; ++v) {
      a[i] = v;
      self(self, i + 1, std::max(mx, v));
    }
  };
  if (j == 0) return 1;
  a[0] = 0;
  rec(rec, 1, 0);
  return count;
}

double binom(int n, int k) {
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST_CASE("cylinder window normalizes to a unit-spaced product") {
  const WarpedMetric m = make_metric(cylinder_spec(2.0, -10, 10));
  const NeckWindow w = normalize_parametrization(m, 0, 8);
  CHECK(w.a() == doctest::Approx(-2).epsilon(1e-12));
  CHECK(w.b() == doctest::Approx(2).epsilon(1e-12));
  for (double t : {0.5, 3.0, 7.9}) CHECK(w.z_of_t(t) == doctest::Approx((t - 4) / 2));
  CHECK(w.r_of_z(1.3) == doctest::Approx(2));
  for (int k = 1; k <= 6; ++k) {
    const NeckCertificate c = certify_neck(m, 0, 8, k);
    CHECK(c.eps == 0);
    CHECK(c.eps_conformal == 0);
    CHECK(c.L == doctest::Approx(2));
    CHECK(c.grid_points >= 512);
  }
}

TEST_CASE("cone window has logarithmic z and exponential radius") {
  const double sigma = 0.2;
  const WarpedMetric m = sampled_cone(sigma);
  const double t0 = 2, t1 = 10, tm = 6;
  const NeckWindow w(m, t0, t1);
  for (double t : {2.0, 4.5, 9.0, 10.0})
    CHECK(w.z_of_t(t) == doctest::Approx(std::log(t / tm) / sigma).epsilon(1e-10));
  for (double z : {w.a(), -1.0, 0.0, 2.5, w.b()})
    CHECK(w.r_of_z(z) == doctest::Approx(sigma * tm * std::exp(sigma * z)).epsilon(1e-10));
  const NeckCertificate c = certify_neck(m, t0, t1, 2);
  CHECK(c.eps_by_order[0] == doctest::Approx(sigma).epsilon(1e-10));
  CHECK(c.eps_by_order[1] < 1e-10);
}

TEST_CASE("slab volume matches the metric volume") {
  const WarpedMetric m = make_metric(flare_spec(0.3));
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    double t0 = rng.uniform(0.05, 20), t1 = rng.uniform(0.05, 20);
    if (t0 > t1) std::swap(t0, t1);
    if (t1 - t0 < 0.1) t1 = t0 + 0.1;
    const NeckWindow w(m, t0, t1);
    const double exact =
        sphere_volume(2) * integrate([&](double t) { return m.phi(t) * m.phi(t); }, t0, t1, 1e-13);
    CHECK(w.slab_volume(w.a(), w.b()) == doctest::Approx(exact).epsilon(1e-8));
  }
}

TEST_CASE("flare certificates agree with hand derivatives") {
  SUBCASE("conical window, first order") {
    const WarpedMetric m = make_metric(flare_spec(0.05));
    const NeckCertificate c = certify_neck(m, 30, 60, 1);
    CHECK(c.eps <= 0.05 + 1e-12);
    CHECK(c.eps == doctest::Approx(0.05 + 0.95 * std::exp(-30.0)).epsilon(1e-12));
  }
  SUBCASE("curved window up to third order") {
    const FlareHand h{0.3};
    const WarpedMetric m = make_metric(flare_spec(0.3));
    const NeckCertificate c = certify_neck(m, 0.5, 3, 3);
    double s1 = 0, s2 = 0, s3 = 0;
    for (int i = 0; i <= 20000; ++i) {
      const double t = 0.5 + 2.5 * i / 20000;
      s1 = std::max(s1, std::abs(h.f1(t)));
      s2 = std::max(s2, std::abs(h.f2(t)));
      s3 = std::max(s3, std::abs(h.f3(t)));
    }
    CHECK(c.eps_by_order[0] == doctest::Approx(s1).epsilon(1e-3));
    CHECK(c.eps_by_order[1] == doctest::Approx(s2).epsilon(1e-3));
    CHECK(c.eps_by_order[2] == doctest::Approx(s3).epsilon(1e-3));
    CHECK(c.eps == doctest::Approx(std::max({s1, s2, s3})).epsilon(1e-3));
  }
}

TEST_CASE("certificates are scale invariant") {
  const WarpedMetric m = make_metric(flare_spec(0.3));
  const NeckCertificate c = certify_neck(m, 0.7, 5.5, 3);
  for (double lambda : {2.0, 0.25, 1024.0}) {
    const WarpedMetric ml = make_metric(scaled(flare_spec(0.3), lambda));
    const NeckCertificate cl = certify_neck(ml, 0.7 * lambda, 5.5 * lambda, 3);
    CHECK(cl.a == c.a);
    CHECK(cl.b == c.b);
    CHECK(cl.eps_by_order == c.eps_by_order);
  }
  const WarpedMetric m3 = make_metric(scaled(flare_spec(0.3), 3.0));
  const NeckCertificate c3 = certify_neck(m3, 0.7 * 3, 5.5 * 3, 3);
  for (int j = 0; j < 3; ++j)
    CHECK(c3.eps_by_order[j] == doctest::Approx(c.eps_by_order[j]).epsilon(1e-12));
}

TEST_CASE("certification is monotone in the requirement") {
  const WarpedMetric m = make_metric(flare_spec(0.3));
  const NeckCertificate c = certify_neck(m, 0.7, 5.5, 4);
  Rng rng(3);
  int checked = 0;
  for (int i = 0; i < 100; ++i) {
    NeckRequirement r1{rng.uniform(0, 1.2), 1 + static_cast<int>(rng.uniform() * 4),
                       rng.uniform(0, 4)};
    NeckRequirement r2{r1.eps + rng.uniform(0, 0.5),
                       1 + static_cast<int>(rng.uniform() * r1.k), r1.L * rng.uniform()};
    REQUIRE(stricter_or_equal(r1, r2));
    if (satisfies(c, r1)) {
      ++checked;
      CHECK(satisfies(c, r2));
    }
    CHECK(certify_neck(m, 0.7, 5.5, r1).pass == satisfies(c, r1));
  }
  CHECK(checked > 10);
}

TEST_CASE("window errors") {
  const WarpedMetric m = make_metric(flare_spec(0.3));
  CHECK_THROWS_WITH_AS(certify_neck(m, -1, 2, 1), doctest::Contains("OutOfDomain"), Error);
  CHECK_THROWS_WITH_AS(normalize_parametrization(m, 0, 2), doctest::Contains("InvalidWindow"),
                       Error);
  CHECK_THROWS_AS(certify_neck(m, 1, 2, 7), Error);
  const WarpedMetric s = make_metric(sphere_spec(1.0));
  CHECK_THROWS_WITH_AS(certify_neck(s, 1, 4, 1), doctest::Contains("OutOfDomain"), Error);
}

TEST_CASE("absolute certificates") {
  const WarpedMetric cyl = make_metric(cylinder_spec(1.5, -10, 10));
  CHECK(certify_absolute_neck(cyl, -6, 7, 3).eps_abs == 0);

  const double sigma = 0.05;
  const WarpedMetric m = make_metric(flare_spec(sigma));
  const AbsoluteNeckCertificate c = certify_absolute_neck(m, 30, 40, 2);
  CHECK(c.eps_abs <= (std::exp(sigma * 2 * c.L) - 1) * (std::sqrt(3.0) + 1));

  // Independent evaluation of u = r^2 / r_mid^2 and du/dz = 2 phi' u on a dense t-grid.
  const FlareHand h{sigma};
  const NeckWindow w(m, 30, 40);
  const double rmid = w.r_of_z(0.5 * (w.a() + w.b()));
  double e0 = 0, e1 = 0;
  for (int i = 0; i <= 20000; ++i) {
    const double t = 30 + 10.0 * i / 20000;
    const double u = h.phi(t) * h.phi(t) / (rmid * rmid);
    e0 = std::max(e0, std::sqrt(3.0) * std::abs(u - 1));
    e1 = std::max(e1, std::sqrt(3.0) * std::abs(2 * h.d1(t) * u));
  }
  CHECK(c.r_mid == doctest::Approx(rmid));
  CHECK(c.eps_metric == doctest::Approx(e0).epsilon(1e-6));
  CHECK(c.eps_by_order[0] == doctest::Approx(e1).epsilon(1e-6));

  double prev = 0;
  for (double t1 : {34.0, 36.0, 40.0, 48.0}) {
    const double e = certify_absolute_neck(m, 30, t1, 2).eps_abs;
    CHECK(e >= prev);
    prev = e;
  }
}

TEST_CASE("derivative chain constants regenerate") {
  const auto& bell = derivative_chain_constants();
  for (int j = 0; j <= kMaxNeckOrder; ++j) CHECK(bell[j] == count_partitions(j));
  const auto& tab = conversion_table();
  for (int j = 1; j <= kMaxNeckOrder; ++j) {
    double alpha = 1;
    for (int i = 1; i < j; ++i) alpha += binom(j, i) * count_partitions(i);
    CHECK(tab[j].alpha == alpha);
    CHECK(tab[j].beta == 2.0 * count_partitions(j));
  }
  CHECK(conversion_constant_dimension_free(1) == 3);
  CHECK(conversion_constant_dimension_free(3) == 20);
  CHECK(conversion_constant(1, 3) == doctest::Approx(1 + 2 * (std::sqrt(3.0) + 0.5)));
}

TEST_CASE("epsilon prime") {
  const double c1 = 1 + 2 * (std::sqrt(3.0) + 0.5);
  const double expect =
      std::min({0.5, std::log(2.0) / 32, 0.1 / (c1 * 65), 0.1 / (1 + 128 * std::sqrt(3.0))});
  CHECK(epsilon_prime(0.1, 1, 16, 3) == doctest::Approx(expect).epsilon(1e-14));
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double eps = std::exp(rng.uniform(-10, 3));
    const int k = 1 + static_cast<int>(rng.uniform() * 6);
    const double L = std::exp(rng.uniform(-3, 6));
    const int n = 3 + static_cast<int>(rng.uniform() * 5);
    const double ep = epsilon_prime(eps, k, L, n);
    CHECK(ep <= eps);
    CHECK(ep > 0);
    const double inv = epsilon_for_neck(ep, k, L, n);
    CHECK(epsilon_prime(inv, k, L, n) >= ep);
    CHECK(inv <= eps * (1 + 1e-12));
  }
  double prev = 1;
  for (double L : {1e1, 1e3, 1e5, 1e7}) {
    const double ep = epsilon_prime(0.1, 2, L);
    CHECK(ep < prev);
    CHECK(ep <= std::log(2.0) / (2 * L));
    prev = ep;
  }
  CHECK(prev < 1e-8);
  CHECK_THROWS_WITH_AS(epsilon_prime(0, 1, 1), doctest::Contains("InvalidInput"), Error);
  CHECK_THROWS_WITH_AS(epsilon_prime(0.1, 0, 1), doctest::Contains("InvalidInput"), Error);
  CHECK_THROWS_WITH_AS(epsilon_prime(0.1, 1, -1), doctest::Contains("InvalidInput"), Error);
}

TEST_CASE("absolute conversion holds on cylinder and flare sweeps") {
  const ConversionReport cyl =
      verify_absolute_conversion(make_metric(cylinder_spec(1.0, -10, 10)), -5, 5, 3);
  CHECK(cyl.pass);
  CHECK(cyl.applicable);

  int applicable = 0;
  for (double sigma : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    const WarpedMetric m = make_metric(flare_spec(sigma));
    for (double L : {4.0, 8.0, 16.0, 32.0, 64.0}) {
      if (2 * L * sigma > 20) continue;
      const double t0 = 30, t1 = t0 * std::exp(2 * L * sigma);
      for (int k : {1, 3}) {
        const ConversionReport r = verify_absolute_conversion(m, t0, t1, k);
        CHECK(r.pass);
        if (r.applicable) {
          ++applicable;
          CHECK(r.margin >= 0);
        }
      }
    }
  }
  CHECK(applicable >= 6);
}

TEST_CASE("absolute conversion on an oscillating warp at the threshold") {
  // log r(z) = A sin(z) with A just under the cap ln2 / 2L.
  const double L = 8, A = 0.9 * std::log(2.0) / (2 * L);
  const int N = 4001;
  Eigen::VectorXd t(N), phi(N);
  double tz = 5;
  for (int i = 0; i < N; ++i) {
    const double z = -L - 0.5 + (2 * L + 1) * i / (N - 1);
    if (i > 0) {
      const double zp = -L - 0.5 + (2 * L + 1) * (i - 1) / (N - 1);
      tz += integrate([&](double y) { return std::exp(A * std::sin(y)); }, zp, z, 1e-14);
    }
    t(i) = tz;
    phi(i) = std::exp(A * std::sin(z));
  }
  const WarpedMetric m = make_metric(sampled_spec(t, phi));
  const NeckWindow whole(m, t(0), t(N - 1));
  const double t0 = whole.t_of_z(whole.a() + 0.5), t1 = whole.t_of_z(whole.b() - 0.5);
  const ConversionReport r = verify_absolute_conversion(m, t0, t1, 2);
  CHECK(r.neck.eps == doctest::Approx(A).epsilon(0.02));
  CHECK(r.applicable);
  CHECK(r.pass);
  CHECK(r.margin >= 0);
}

TEST_CASE("certificate csv row") {
  const NeckCertificate c =
      certify_neck(make_metric(cylinder_spec(1.0, -10, 10)), -1, 1, NeckRequirement{0.1, 2, 1});
  CHECK(neck_csv_header() == "a,b,k,L,eps_conformal,eps_logr,eps,pass");
  CHECK(neck_csv_row(c) == "-1,1,2,1,0,0,0,1");
}
