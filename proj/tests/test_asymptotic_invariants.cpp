#include <cmath>
#include <numbers>
#include <string>

#include "neckscope/asymptotic_invariants.hpp"
#include "neckscope/constant_chain.hpp"
#include "neckscope/error.hpp"
#include "neckscope/neck_analysis.hpp"
#include "test_main.hpp"

using namespace neckscope;

namespace {

constexpr double kPi = std::numbers::pi;

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Undefined;
}

std::vector<double> log_grid(double a, double b, int per_decade) {
  std::vector<double> g;
  const int N = static_cast<int>(std::round(per_decade * std::log10(b / a)));
  for (int i = 0; i <= N; ++i) g.push_back(a * std::pow(b / a, double(i) / N));
  return g;
}

double flare_ascr(double s) { return 2 * (1 - s * s) / (s * s); }

// Upper bound slab t in [t0, t1] of the near-cylindrical flare, by quadrature.
double slab(const WarpedMetric& m, double t0, double t1) {
  return 4 * kPi * integrate([&](double t) { return std::pow(m.phi(t), 2); }, t0, t1, 1e-9);
}

}  // namespace

TEST_CASE("ASCR of flares") {
  const auto grid = log_grid(1, 1e3, 10);
  for (double s : {0.1, 0.3, 0.5}) {
    const AscrProfile p = ascr_profile(make_metric(flare_spec(s)), grid);
    CHECK_FALSE(p.diverging);
    CHECK(p.ascr_estimate == doctest::Approx(flare_ascr(s)).epsilon(0.05));
    CHECK(p.ascr_estimate == doctest::Approx(flare_ascr(s)).epsilon(1e-4));
    for (size_t i = 0; i < p.r.size(); ++i) {
      if (i > 0) CHECK(p.a2[i] <= p.a2[i - 1]);
      CHECK(p.kappa[i] * p.r[i] * p.r[i] <= p.a2[i] * (1 + 1e-12));
      CHECK(p.rho[i] == doctest::Approx(kPi * p.r[i] / (4 * std::sqrt(p.a2[i]))).epsilon(1e-15));
    }
  }
}

TEST_CASE("ASCR special cases") {
  const auto grid = log_grid(1, 100, 10);
  const AscrProfile c = ascr_profile(make_metric(cylinder_spec(1, 0, kInf)), grid);
  CHECK(c.diverging);
  CHECK(std::isinf(c.ascr_estimate));
  const AscrProfile f = ascr_profile(make_metric(flat_spec()), grid);
  CHECK_FALSE(f.diverging);
  CHECK(f.ascr_estimate == 0);
  CHECK(std::isinf(f.rho[0]));
  CHECK(code_of([] { ascr_profile(make_metric(sphere_spec(1)), {1.0}); }) ==
        Errc::RequiresNoncompact);
  CHECK(code_of([] { ascr_profile(make_metric(flat_spec()), {2.0, 1.0}); }) == Errc::InvalidRange);
  // A truncated end counts as noncompact.
  WarpSpec tr = flare_spec(0.3, 3, 1e5);
  CHECK(code_of([&] { ascr_profile(make_metric(tr), grid); }) == Errc::RequiresNoncompact);
  tr.truncated = true;
  const AscrProfile t = ascr_profile(make_metric(tr), grid);
  CHECK(t.ascr_estimate == doctest::Approx(flare_ascr(0.3)).epsilon(0.05));
}

TEST_CASE("ASCR is scale invariant") {
  const auto grid = log_grid(1, 1e3, 10);
  const double base = ascr_profile(make_metric(flare_spec(0.3)), grid).ascr_estimate;
  for (double lam : {0.5, 3.0, 1e3}) {
    std::vector<double> g2;
    for (double r : grid) g2.push_back(lam * r);
    const AscrProfile p = ascr_profile(make_metric(scaled(flare_spec(0.3), lam)), g2);
    CHECK(p.ascr_estimate == doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("ASCR csv") {
  const AscrProfile p = ascr_profile(make_metric(flat_spec()), {1.0, 2.0});
  const std::string s = ascr_csv(p);
  CHECK(s.rfind("r,a2,kappa,rho\n1,0,0,inf\n", 0) == 0);
}

TEST_CASE("AVR closed forms") {
  const AvrResult f = avr(make_metric(flat_spec()));
  CHECK_FALSE(f.upper_bound_only);
  CHECK(std::abs(f.value - 4 * kPi / 3) <= 1e-6);
  const AvrResult c = avr(make_metric(cylinder_spec(1, 0, kInf)));
  CHECK(c.upper_bound_only);
  CHECK(std::abs(c.value) <= 1e-6);
  for (double s : {0.1, 0.3, 0.5}) {
    const AvrResult a = avr(make_metric(flare_spec(s)));
    CHECK(a.value == doctest::Approx(4 * kPi * s * s / 3).epsilon(0.02));
    CHECK(a.value == doctest::Approx(4 * kPi * s * s / 3).epsilon(1e-6));
  }
  CHECK(code_of([] { avr(make_metric(sphere_spec(1))); }) == Errc::InvalidRange);
}

TEST_CASE("theta vanishes for flat space and at a pole") {
  const auto grid = log_grid(1, 1e3, 4);
  const auto flat = make_metric(flat_spec());
  const ThetaProfile f = theta_profile(flat, meridian_point(flat, 3, 0), grid);
  CHECK(f.excluded == 0);
  for (double th : f.theta) CHECK(th == 0);
  CHECK(f.ray_psi.size() == static_cast<size_t>(f.directions));

  const auto fl = make_metric(flare_spec(0.3));
  const ThetaProfile p = theta_profile(fl, meridian_point(fl, 0, 0), grid);
  CHECK(p.q_at_pole);
  for (double th : p.theta) CHECK(th == 0);
}

TEST_CASE("theta on a flare decreases to zero") {
  const auto grid = log_grid(1, 1e3, 4);
  const auto fl = make_metric(flare_spec(0.3));
  const ThetaProfile p = theta_profile(fl, meridian_point(fl, 5, 0), grid);
  CHECK(p.excluded * 100 < p.directions);
  for (size_t i = 1; i < p.theta.size(); ++i) CHECK(p.theta[i] <= p.theta[i - 1]);
  CHECK(p.theta.back() <= p.theta_err.back() + 1e-12);
  CHECK(p.theta.front() > 0.5);
  CHECK(p.theta[p.theta.size() / 2] < 0.5 * p.theta.front());
  // Radial outward geodesics are rays; the one through the pole is not.
  CHECK(p.ray_psi.front() == 0);
  CHECK(p.segment_cut.back() < 1e3);
  // Sampled oracle: a direction counted as a segment of length c is minimal at c/2.
  for (size_t j = 0; j < p.segment_psi.size(); j += 16) {
    const double c = std::min(p.segment_cut[j], 50.0);
    const MeridianTrace tr = trace_meridian(fl, 5, p.segment_psi[j], 0.5 * c);
    if (tr.status != MeridianTrace::Status::Done) continue;
    CHECK(meridian_distance(fl, 5, tr.t, tr.alpha).length >= 0.5 * c - 1e-6);
  }
  const std::string csv = theta_csv(p);
  CHECK(csv.rfind("r,theta\n", 0) == 0);
  CHECK(theta_at(p, 0.5) == kPi);
  CHECK(theta_at(p, 2e3) == p.theta.back());
  CHECK(code_of([&] {
          ThetaOptions o;
          o.ray_samples = 16;
          theta_profile(fl, meridian_point(fl, 5, 0), grid, o);
        }) == Errc::InvalidInput);
}

TEST_CASE("Busemann bounds at a pole and in flat space") {
  const auto fl = make_metric(flare_spec(0.3));
  const Point pole = meridian_point(fl, 0, 0);
  const ThetaProfile pp = theta_profile(fl, pole, {1.0});
  for (double t : {1.0, 7.0, 40.0}) {
    const Point x = meridian_point(fl, t, 1.0);
    const BusemannBounds b = busemann_estimate(fl, pp, x);
    CHECK(b.lower == b.upper);
    CHECK(b.upper == doctest::Approx(distance(fl, pole, x)).epsilon(1e-9));
  }

  const auto flat = make_metric(flat_spec());
  const Point Q = meridian_point(flat, 3, 0);
  const auto grid = log_grid(1, 1e3, 4);
  ThetaOptions coarse;
  coarse.segment_samples = 16;
  coarse.ray_samples = 32;
  coarse.max_doublings = 0;
  const ThetaProfile p0 = theta_profile(flat, Q, grid, coarse);
  const ThetaProfile p1 = theta_profile(flat, Q, grid);
  double gap0 = 0, gap1 = 0;
  Rng rng(11);
  for (int i = 0; i < 12; ++i) {
    const Point x = meridian_point(flat, rng.uniform(0.5, 30), rng.uniform(0, kPi));
    const BusemannBounds b0 = busemann_estimate(flat, p0, x, coarse);
    const BusemannBounds b1 = busemann_estimate(flat, p1, x);
    CHECK(b1.lower <= b1.upper);
    CHECK(b1.upper == doctest::Approx(distance(flat, Q, x)).epsilon(1e-12));
    // Worst angular miss pi / 512 costs at most d (1 - cos) plus the truncation.
    CHECK(b1.upper - b1.lower <= b1.upper * (1 - std::cos(kPi / 512)) + 1e-3);
    gap0 = std::max(gap0, b0.upper - b0.lower);
    gap1 = std::max(gap1, b1.upper - b1.lower);
  }
  CHECK(gap1 <= gap0);
}

TEST_CASE("Busemann bounds on a flare are consistent and Lipschitz") {
  const auto fl = make_metric(flare_spec(0.3));
  const Point Q = meridian_point(fl, 5, 0);
  std::vector<Point> xs;
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const double t = rng.uniform(0.5, 80), a = rng.uniform(0, kPi);
    xs.push_back(meridian_point(fl, t, a));
    // A near partner for the Lipschitz pairs.
    xs.push_back(meridian_point(fl, t + rng.uniform(-0.4, 0.4), a + rng.uniform(-0.05, 0.05)));
  }
  const BusemannReport rep = busemann_report(fl, Q, log_grid(1, 1e3, 4), xs, 0.5);
  REQUIRE(rep.bounds.size() == xs.size());
  double far_gap = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const BusemannBounds& b = rep.bounds[i];
    CHECK(b.lower <= b.upper);
    CHECK(b.upper == doctest::Approx(distance(fl, Q, xs[i])).epsilon(1e-9));
    if (b.upper > 60) far_gap = std::max(far_gap, (b.upper - b.lower) / b.upper);
  }
  for (size_t i = 0; i + 1 < xs.size(); i += 2) {
    const double dxy = distance(fl, xs[i], xs[i + 1]);
    // b is 1-Lipschitz, so each lower bound sits below the other upper bound plus d.
    CHECK(rep.bounds[i].lower <= rep.bounds[i + 1].upper + dxy + 1e-6);
    CHECK(rep.bounds[i + 1].lower <= rep.bounds[i].upper + dxy + 1e-6);
    CHECK(std::abs(rep.bounds[i].upper - rep.bounds[i + 1].upper) <= dxy + 1e-6);
  }
  CHECK(far_gap < 0.05);
}

TEST_CASE("containment clauses in flat space") {
  const auto flat = make_metric(flat_spec());
  const Point Q = meridian_point(flat, 3, 0);
  for (auto kind : {Perturbation::Zero, Perturbation::PlusConstant, Perturbation::MinusConstant,
                    Perturbation::Oscillating}) {
    const ContainmentReport c = busemann_containment_check(flat, Q, 10, 5, 0.1, kind, 0.099);
    CHECK(c.pass());
    for (const auto& cl : c.clause) CHECK(cl.checked > 0);
    if (kind != Perturbation::Zero) CHECK(c.clause[0].worst_margin < 0.0011);
  }
  const ContainmentReport z = busemann_containment_check(flat, Q, 10, 5, 0.1, Perturbation::Zero);
  CHECK(z.eta == doctest::Approx(10).epsilon(1e-8));
  CHECK(code_of([&] {
          busemann_containment_check(flat, Q, 10, 5, 0.1, Perturbation::PlusConstant, 0.1);
        }) == Errc::InvalidInput);
}

TEST_CASE("Bishop-Gromov ratios") {
  const auto flat = make_metric(flat_spec());
  const BishopGromovReport f =
      bishop_gromov_check(flat, meridian_point(flat, 0, 0), {0.5, 1, 2, 4, 8});
  CHECK(f.exact);
  CHECK(f.pass);
  for (double r : f.ratio) CHECK(r == doctest::Approx(1).epsilon(1e-9));

  const auto sph = make_metric(sphere_spec(1));
  const std::vector<double> radii{0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  const BishopGromovReport s = bishop_gromov_check(sph, meridian_point(sph, 0, 0), radii);
  CHECK(s.pass);
  for (size_t i = 0; i + 1 < radii.size(); ++i) {
    const double r = radii[i], R = radii[i + 1];
    const double exact = 2 * kPi * ((R - r) - (std::sin(2 * R) - std::sin(2 * r)) / 2);
    CHECK(s.volume[i] == doctest::Approx(exact).epsilon(1e-9));
    if (i > 0) CHECK(s.ratio[i] < s.ratio[i - 1]);
  }

  const auto fl = make_metric(flare_spec(0.3));
  const BishopGromovReport m =
      bishop_gromov_check(fl, meridian_point(fl, 5, 0), {2, 5, 12, 30}, 20000, 3);
  CHECK_FALSE(m.exact);
  CHECK(m.pass);
  for (double e : m.ratio_err) CHECK(e > 0);

  CHECK(code_of([] {
          const auto db = make_metric(dumbbell_spec(0.8));
          bishop_gromov_check(db, meridian_point(db, 0, 0), {0.2, 0.5, 1.0});
        }) == Errc::HypothesisFail);
}

TEST_CASE("relative volume across a certified neck") {
  const auto m = make_metric(flare_spec(1e-4));
  const double t0 = 10, t1 = 43;
  const Point Q = neck_base_point(m, t0, t1, 16);
  const RelVolReport r = relative_volume_report(m, t0, t1, Q, 0, 0, 16);
  CHECK(r.delta == delta_of_Lb(3, 16));
  CHECK(r.neck_eps <= r.eps_b);
  CHECK(r.R1 == r.r0);
  CHECK(r.R2 == 2 * r.R1);
  CHECK(r.ratio >= 0);
  CHECK(r.pass);
  CHECK(r.w0_ok);
  CHECK(r.w0 >= 14.4);
  CHECK(r.sublemma_ok);
  CHECK(r.sublemma_points > 0);
  // Oracle: beyond the cap the annulus is a slab of the nearly flat cylinder.
  const double euc = 4 * kPi / 3 * (std::pow(r.R2, 3) - std::pow(r.R1, 3));
  const double approx = slab(m, Q.t + r.R1, Q.t + r.R2) / euc;
  CHECK(r.ratio == doctest::Approx(approx).epsilon(0.1));

  const auto flat = make_metric(flat_spec());
  CHECK(code_of([&] {
          relative_volume_report(flat, 10, 43, meridian_point(flat, 10, 0), 0, 0, 16);
        }) == Errc::PreconditionNeck);
  // A conical flare never gets below eps_b on its neck region.
  const auto f05 = make_metric(flare_spec(0.05));
  CHECK(code_of([&] {
          relative_volume_report(f05, 10, 60, neck_base_point(f05, 10, 60, 16), 0, 0, 16);
        }) == Errc::PreconditionNeck);
  CHECK(code_of([&] { relative_volume_report(m, t0, t1, Q, 5, 0, 16); }) == Errc::InvalidRange);
}

TEST_CASE("containment from a pole base point") {
  // Geodesics leave the pole radially, so the level sets are distance spheres.
  const auto flat = make_metric(flat_spec());
  const ContainmentReport c =
      busemann_containment_check(flat, meridian_point(flat, 0, 0), 10, 2, 0.5);
  CHECK(c.pass());
  for (const auto& cl : c.clause) CHECK(cl.checked > 0);
}
