#include "neckscope/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "neckscope/asymptotic_invariants.hpp"
#include "neckscope/constant_chain.hpp"
#include "neckscope/curvature_pinching.hpp"
#include "neckscope/error.hpp"
#include "neckscope/hypersurface_gauss_bonnet.hpp"
#include "neckscope/neck_analysis.hpp"
#include "neckscope/numerics.hpp"
#include "neckscope/ricci_flow_sim.hpp"

namespace neckscope {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(const char* f, auto... a) {
  char b[512];
  std::snprintf(b, sizeof b, f, a...);
  return b;
}

std::vector<double> log_grid(double a, double b, int per_decade) {
  std::vector<double> g;
  const int N = static_cast<int>(std::round(per_decade * std::log10(b / a)));
  for (int i = 0; i <= N; ++i) g.push_back(a * std::pow(b / a, double(i) / N));
  return g;
}

// log r(z) = A sin(z / w) on |z| <= L + 1/2, as a sampled warp in t.
WarpedMetric oscillating_warp(double A, double w, double L) {
  const int N = 2001;
  Eigen::VectorXd t(N), phi(N);
  const double z0 = -L - 0.5, dz = (2 * L + 1) / (N - 1);
  t(0) = 5;
  for (int i = 0; i < N; ++i) {
    const double z = z0 + i * dz;
    if (i > 0)
      t(i) = t(i - 1) + integrate([&](double y) { return std::exp(A * std::sin(y / w)); },
                                  z - dz, z, 1e-14);
    phi(i) = std::exp(A * std::sin(z / w));
  }
  return make_metric(sampled_spec(t, phi));
}

// ---------------------------------------------------------------- 1

CriterionResult neck_exactness() {
  CriterionResult r;
  double worst = 0;
  int certs = 0;
  for (double c : {0.5, 1.0, 2.0}) {
    const WarpedMetric m = make_metric(cylinder_spec(c, -10, 10));
    for (auto [t0, t1] : {std::pair{-9.0, 9.0}, {-3.0, -1.0}, {0.0, 5.0}, {-10.0, 10.0}})
      for (int k = 1; k <= kMaxNeckOrder; ++k) {
        worst = std::max(worst, certify_neck(m, t0, t1, k).eps);
        ++certs;
      }
  }
  // Scale invariance: identical certificates under homotheties.
  double scale_dev = 0;
  for (double lam : {0.25, 2.0, 1024.0}) {
    const WarpedMetric m = make_metric(flare_spec(0.1));
    const WarpedMetric ms = make_metric(scaled(flare_spec(0.1), lam));
    for (int k : {1, 3, 6}) {
      const NeckCertificate a = certify_neck(m, 20, 60, k);
      const NeckCertificate b = certify_neck(ms, 20 * lam, 60 * lam, k);
      scale_dev = std::max({scale_dev, std::abs(a.eps - b.eps), std::abs(a.L - b.L)});
    }
  }
  r.pass = worst <= 1e-12 && scale_dev == 0;
  r.margin = fmt("max cylinder eps %.3g <= 1e-12; scaled-certificate deviation %.3g == 0", worst,
                 scale_dev);
  r.detail = fmt("%d cylinder certificates, k = 1..6; flare(0.1) under 3 homotheties", certs);
  r.limit_seconds = 1;
  return r;
}

// ---------------------------------------------------------------- 2

CriterionResult absolute_soundness() {
  CriterionResult r;
  int cases = 0, applicable = 0, failures = 0;
  double worst = kInf;
  auto run = [&](const WarpedMetric& m, double t0, double t1, int k, double eps) {
    const ConversionReport c = verify_absolute_conversion(m, t0, t1, k, eps);
    ++cases;
    if (!c.applicable) return;
    ++applicable;
    if (!c.pass) ++failures;
    worst = std::min(worst, c.margin / c.eps);
  };
  for (int k = 1; k <= 3; ++k) {
    for (double c : {0.5, 2.0})
      for (double L : {1.0, 16.0, 64.0})
        run(make_metric(cylinder_spec(c, -200, 200)), -L * c, L * c, k, 0);
    for (double s : {1e-4, 1e-3, 0.01, 0.05, 0.2}) {
      const WarpedMetric m = make_metric(flare_spec(s));
      for (double L : {1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
        if (2 * L * s > 12) continue;
        for (double t0 : {5.0, 30.0, 200.0}) {
          const double t1 = t0 * std::exp(2 * L * s);
          for (double eps : {0.0, 0.5, 0.05}) run(m, t0, t1, k, eps);
        }
      }
    }
    for (double L : {2.0, 8.0, 32.0})
      for (double frac : {0.3, 0.9})
        for (double w : {1.0, 3.0}) {
          const double A = frac * std::log(2.0) / (2 * L);
          const WarpedMetric m = oscillating_warp(A, w, L);
          const NeckWindow whole(m, m.t_min(), m.t_max());
          const double t0 = whole.t_of_z(whole.a() + 0.5), t1 = whole.t_of_z(whole.b() - 0.5);
          for (double eps : {0.0, 0.5}) run(m, t0, t1, k, eps);
        }
  }
  r.pass = cases >= 500 && failures == 0;
  r.margin = fmt("failures %d == 0; smallest relative slack (eps - eps_abs)/eps %.3g", failures,
                 worst);
  r.detail = fmt("%d cases (cylinder, flare, oscillating; k <= 3; L <= 64), %d certify at eps'",
                 cases, applicable);
  r.limit_seconds = 60;
  return r;
}

// ---------------------------------------------------------------- 3, 4

CriterionResult ascr_closed_form() {
  CriterionResult r;
  r.pass = true;
  double worst = 0;
  std::string vals;
  for (double s : {0.1, 0.3, 0.5}) {
    const double exact = 2 * (1 - s * s) / (s * s);
    const AscrProfile p = ascr_profile(make_metric(flare_spec(s)), log_grid(1, 1e3, 10));
    const double rel = std::abs(p.ascr_estimate / exact - 1);
    worst = std::max(worst, rel);
    if (!(rel <= 0.05) || p.diverging) r.pass = false;
    vals += fmt("%s%.6g (exact %.6g)", vals.empty() ? "" : ", ", p.ascr_estimate, exact);
  }
  r.margin = fmt("max relative error %.3g <= 0.05", worst);
  r.detail = "flare(0.1, 0.3, 0.5): " + vals;
  r.limit_seconds = 60;
  return r;
}

CriterionResult avr_closed_form() {
  CriterionResult r;
  const double f = avr(make_metric(flat_spec())).value;
  const double c = avr(make_metric(cylinder_spec(1, 0, kInf))).value;
  double worst = 0;
  for (double s : {0.1, 0.3, 0.5}) {
    const double exact = 4 * kPi * s * s / 3;
    worst = std::max(worst, std::abs(avr(make_metric(flare_spec(s))).value / exact - 1));
  }
  const double fe = std::abs(f - 4 * kPi / 3);
  r.pass = fe <= 1e-6 && std::abs(c) <= 1e-6 && worst <= 0.02;
  r.margin = fmt("flat |err| %.3g <= 1e-6; cylinder %.3g ~ 0; flare max rel %.3g <= 0.02", fe,
                 c, worst);
  r.detail = "flare sigma in {0.1, 0.3, 0.5}";
  return r;
}

// ---------------------------------------------------------------- 5

CriterionResult bishop_gromov(const SuiteOptions& o) {
  CriterionResult r;
  r.pass = true;
  int exact = 0, mc = 0;
  double worst = -kInf;
  auto run = [&](const WarpedMetric& m, double t, std::vector<double> radii) {
    const BishopGromovReport b =
        bishop_gromov_check(m, meridian_point(m, t, 0), radii, 100000, o.seed, o.jobs);
    if (!b.pass) r.pass = false;
    (b.exact ? exact : mc)++;
    worst = std::max(worst, b.worst_excess);
  };
  const WarpedMetric flat = make_metric(flat_spec()), sph = make_metric(sphere_spec(1));
  const WarpedMetric fl = make_metric(flare_spec(0.3)), fl1 = make_metric(flare_spec(0.1));
  const WarpedMetric cyl = make_metric(cylinder_spec(1, -50, 50));
  run(flat, 0, {0.5, 1, 2, 4, 8});
  run(sph, 0, {0.1, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0});
  run(fl, 0, {0.5, 2, 5, 12, 30});
  run(fl1, 0, {0.5, 2, 5, 12, 30});
  run(flat, 3, {0.5, 1, 2, 4});
  run(sph, 1, {0.2, 0.5, 1.0, 1.5});
  run(fl, 5, {2, 5, 12, 30});
  run(fl1, 3, {1, 3, 8, 20});
  run(cyl, 0, {0.5, 1, 2, 4, 8});
  r.margin = fmt("worst excess (ratio increase / 3 sigma) %.3g <= 1", std::max(worst, 0.0));
  r.detail = fmt("%d pole-centered exact chains, %d off-pole chains at 1e5 samples (seed %llu); "
                 "dumbbell excluded (negative Ricci)",
                 exact, mc, static_cast<unsigned long long>(o.seed));
  r.limit_seconds = 300;
  return r;
}

// ---------------------------------------------------------------- 6

CriterionResult relative_volume(const SuiteOptions& o) {
  CriterionResult r;
  RelVolOptions opt;
  opt.seed = o.seed;
  opt.jobs = o.jobs;
  const WarpedMetric m = make_metric(flare_spec(1e-4));
  const double t0 = 10, t1 = 43, Lb = 16;
  const RelVolReport v =
      relative_volume_report(m, t0, t1, neck_base_point(m, t0, t1, Lb), 0, 0, Lb, opt);
  const double lim = delta_of_Lb(3, 16) + 3 * v.ratio_err;
  r.pass = v.ratio <= lim && v.w0 >= 0.9 * 16;
  r.margin = fmt("ratio %.4g <= delta(16) + 3 sigma = %.4g; w0 %.4g >= 14.4", v.ratio, lim, v.w0);
  r.detail = fmt("flare(1e-4), window t in [10, 43], neck eps %.3g <= eps_b %.3g, R1 %.4g",
                 v.neck_eps, v.eps_b, v.R1);
  r.limit_seconds = 600;
  return r;
}

// ---------------------------------------------------------------- 7

CriterionResult gauss_bonnet() {
  CriterionResult r;
  double worst = 0, flat_q = 0;
  int spheres = 0;
  auto total = [&](const WarpedMetric& m, double R, double frac, double target) {
    const double K = ambient_curvature_sup(m, R);
    const double rho = K > 0 ? frac * kPi / (2 * std::sqrt(K)) : 10 * frac;
    const GBReport g = gauss_bonnet_integrand(m, parallel_surface(m, R, rho));
    worst = std::max(worst, std::abs(g.total / target - 1));
    if (m.spec().family == Family::Flat) flat_q = std::max(flat_q, std::abs(g.Q));
    ++spheres;
  };
  for (int n : {3, 5}) {
    const double target = n == 3 ? 4 * kPi : 8 * kPi * kPi / 3;
    for (double f : {0.1, 0.5, 0.9, 0.99}) {
      total(make_metric(sphere_spec(2, n)), 0.05, f, target);
      total(make_metric(dumbbell_spec(0.8, n)), 0.1, f, target);
      total(make_metric(flat_spec(n)), 0.5, f, target);
      for (double s : {0.05, 0.3, 0.8})
        for (double R : {1.0, 10.0}) total(make_metric(flare_spec(s, n)), R, f, target);
    }
  }
  int area_cases = 0, area_fail = 0;
  double area_worst = kInf;
  for (int n : {3, 5})
    for (double s : {0.05, 0.1, 0.3, 0.5, 0.9}) {
      const WarpedMetric m = make_metric(flare_spec(s, n));
      for (double R : {1.0, 2.0, 4.0, 10.0, 30.0, 100.0}) {
        const double rho_max = ascr_profile(m, {R - 0.5}).rho[0];
        for (int k = 1; k <= 5; ++k) {
          const AreaBoundCheck c = area_lower_bound_check(m, R, rho_max * (k / 5.0), 0.5);
          ++area_cases;
          if (!c.pass) ++area_fail;
          area_worst = std::min(area_worst, c.margin / c.bound);
        }
      }
    }
  r.pass = worst <= 1e-10 && flat_q == 0 && area_fail == 0;
  r.margin = fmt("max |total/omega - 1| %.3g <= 1e-10; flat |Q| %.3g == 0; area failures %d, "
                 "smallest (area-bound)/bound %.3g",
                 worst, flat_q, area_fail, area_worst);
  r.detail = fmt("%d spheres (n = 3, 5), %d area cases, c(3) = %g, c(5) = %g", spheres,
                 area_cases, gauss_bonnet_constant(3), gauss_bonnet_constant(5));
  return r;
}

// ---------------------------------------------------------------- 8, 9

EigenTriple random_triple(Rng& g, bool mixed) {
  const double a = g.uniform(), b = g.uniform(), c = g.uniform();
  auto sgn = [&] { return mixed && g.uniform() < 0.5 ? -1.0 : 1.0; };
  return EigenTriple(sgn() * a, sgn() * b, sgn() * c);
}

CriterionResult p_lower_bound(const SuiteOptions& o) {
  CriterionResult r;
  // Hand cases: P and the bound, exactly.
  const LemmaCResult a = lemma_c_check({1, 1, 1}, 1), b = lemma_c_check({1, 1, 0}, 1);
  const LemmaCResult c = lemma_c_check({1, 0, 0}, 0.5);
  const bool hand = a.status == LemmaStatus::Pass && a.P == 0 && a.rhs == 0 &&
                    b.status == LemmaStatus::Pass && b.P == 2 &&
                    std::abs(b.rhs - 1.0 / 144) <= 1e-15 && p_quantity({1, 0, 0}) == 0 &&
                    c.status == LemmaStatus::NotApplicable;
  Rng g(o.seed);
  long checked = 0, violations = 0;
  double worst = kInf;
  for (int i = 0; i < 1000000; ++i) {
    const EigenTriple e = random_triple(g, true);
    const double d = max_admissible_delta(e);
    if (!(d > 0)) continue;
    const LemmaCResult l = lemma_c_check(e, d);
    ++checked;
    if (l.status != LemmaStatus::Pass) ++violations;
    worst = std::min(worst, l.ratio);
  }
  r.pass = hand && violations == 0;
  r.margin = fmt("violations %ld == 0; smallest P/bound %.4g; hand cases %s", violations, worst,
                 hand ? "exact" : "MISMATCH");
  r.detail = fmt("1e6 mixed-sign triples (seed %llu), %ld satisfy the hypothesis at the largest "
                 "admissible delta; hand P(1,1,1)=0, P(1,0,0)=0, P(1,1,0)=2 vs 1/144",
                 static_cast<unsigned long long>(o.seed), checked);
  r.limit_seconds = 30;
  return r;
}

CriterionResult dichotomy(const SuiteOptions& o) {
  CriterionResult r;
  Rng g(o.seed + 1);
  int classified = 0, alt1 = 0, violations = 0;
  double worst = kInf;
  while (classified < 10000) {
    const EigenTriple e0 = random_triple(g, false);
    const double t = -std::exp(g.uniform(-3, 5));
    const double gam = g.uniform(0.2, 4), delta = g.uniform(0.05, 0.95);
    const double c = gam / 8 * g.uniform(0.1, 1), eps = pinching_eta(delta) * g.uniform(0.1, 1);
    const EigenTriple e = e0.scaled(c * std::exp(g.uniform(-3, 3)) / (e0.norm() * -t));
    if (classify(e, t, c, delta) == Alternative::NotClassified) continue;
    const DichotomyResult d = dichotomy_check(e, t, c, delta, gam, eps);
    ++classified;
    if (d.alt == Alternative::NotEssential) ++alt1;
    if (!d.pass) ++violations;
    if (d.G > 0) worst = std::min(worst, d.margin / std::abs(d.bound));
  }
  r.pass = violations == 0;
  r.margin = fmt("violations %d == 0; smallest relative margin %.3g", violations, worst);
  r.detail = fmt("%d classified triples: %d not essential, %d not necklike", classified, alt1,
                 classified - alt1);
  return r;
}

// ---------------------------------------------------------------- 10, 11

FlowConfig timed(double stop_time) {
  FlowConfig c;
  c.stop_time = stop_time;
  c.stop_rmax = kInf;
  c.snapshot_every = 1L << 40;
  c.snapshot_rfactor = kInf;
  return c;
}

CriterionResult flow_exactness() {
  CriterionResult r;
  const double T = 0.4 * 0.25;
  const RunHistory h = run_flow(init_round_sphere(1, 1024), timed(T));
  const FlowState& s = h.snapshots.back();
  const double a2 = 1 - 4 * s.t;
  double err = 0;
  for (int i = 0; i < s.size(); ++i) err = std::max(err, std::abs(s.psi(i) * s.psi(i) / a2 - 1));
  double R[3];
  int k = 0;
  for (int g : {128, 256, 512})
    R[k++] = run_flow(init_dumbbell(0.8, g, 0.5), timed(0.02)).snapshots.back().diag.R_max;
  const double coarse = std::abs(R[1] - R[0]), fine = std::abs(R[2] - R[1]);
  const double order = std::log2(coarse / fine);
  // Richardson for fourth order: the finer change should be coarse / 15.
  r.pass = err <= 1e-6 && s.t == T && fine <= 4 * coarse / 15;
  r.margin = fmt("max |a^2/(1-4t) - 1| %.3g <= 1e-6; dumbbell R_max changes %.3g -> %.3g "
                 "(<= 4 x Richardson %.3g), observed order %.2f",
                 err, coarse, fine, coarse / 15, order);
  r.detail = fmt("round S^3 grid 1024, %ld steps to t = %.3g (40%% of lifespan)", h.steps, s.t);
  r.limit_seconds = 300;
  return r;
}

CriterionResult neckpinch() {
  CriterionResult r;
  FlowConfig c;
  c.profile = "dumbbell";
  c.A = 0.8;
  c.grid = 512;
  c.cluster = 0.5;
  c.stop_rmax = 1e4;
  const RunHistory h = run_flow(init_from_config(c), c);
  const auto ns = track_neck(h, 1, 10, 0.1);
  const double r_end = h.snapshots.back().diag.R_max;
  // The last decade of R_max growth.
  bool mono = true;
  double prev = kInf, first = 0;
  int in_decade = 0;
  for (const NeckSample& n : ns) {
    if (n.rmax < r_end / 10 || !n.found || !n.window_fits) continue;
    if (in_decade++ == 0) first = n.eps_at_L;
    if (n.eps_at_L > prev * (1 + 1e-9)) mono = false;
    prev = n.eps_at_L;
  }
  const NeckSample& last = ns.back();
  const bool final_ok = last.found && last.window_fits && last.eps_at_L <= 0.1;
  r.pass = h.stop_reason == "rmax" && final_ok && mono && in_decade >= 2;
  r.margin = fmt("final eps(k=1, L=10) %.4g <= 0.1; largest L with eps <= 0.1: %.3g >= 10; "
                 "nonincreasing over last decade: %s (%.4g -> %.4g, %d samples)",
                 last.eps_at_L, last.L_achieved, mono ? "yes" : "no", first, last.eps_at_L,
                 in_decade);
  r.detail = fmt("dumbbell(0.8) grid 512 cluster 0.5 to R_max %.4g (%s, %ld steps); "
                 "necklike delta at the center %.3g",
                 r_end, h.stop_reason.c_str(), h.steps, last.delta_star);
  r.limit_seconds = 900;
  return r;
}

// ---------------------------------------------------------------- 12

// t1 > t0 where the z half-length of [t0, t1] reaches L; inf past 1e12.
double window_end(const WarpedMetric& m, double t0, double L) {
  auto half = [&](double t1) { return NeckWindow(m, t0, t1).half_length(); };
  double hi = t0 + 1;
  while (half(hi) < L) {
    hi = t0 + 2 * (hi - t0);
    if (hi > 1e7) return kInf;  // windows this long never certify at these thresholds
  }
  double lo = t0;
  for (int it = 0; it < 60 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (half(mid) < L ? lo : hi) = mid;
  }
  return hi;
}

CriterionResult soundness() {
  CriterionResult r;
  bool round_trip = true;
  double rt_worst = kInf;
  for (int n : {3, 5})
    for (double C0 : {1.0, 10.0, 100.0, 1e3}) {
      const ChainConstants k = constants_for(n, C0);
      const double got = ascr_lower_bound(n, k.L0, k.c_n, k.eta1);
      rt_worst = std::min(rt_worst, got / C0);
      if (!(got >= C0)) round_trip = false;
    }
  bool mono = true;
  for (int n : {3, 5}) {
    const double cn = gauss_bonnet_constant(n);
    double pd = kInf, pc = -kInf;
    for (double L = 16; L < 1e6; L *= 1.05) {
      const double d = delta_of_Lb(n, L), C = ascr_lower_bound(n, L, cn, 0.5);
      if (!(d < pd) || !(C >= pc)) mono = false;
      pd = d;
      pc = C;
    }
  }
  const auto grid = log_grid(1, 1e3, 10);
  // Presets with a certified neck at the thresholds of each requested C0.
  int certified = 0, checked = 0, unsound = 0;
  double slack = kInf;
  for (double C0 : {0.0, 1.0, 10.0, 100.0, 1e3}) {
    const ChainConstants k = constants_for(3, C0);
    const double bound = ascr_lower_bound(3, k.L0, k.c_n, k.eta1);
    for (double s : {1e-6, 1e-5, 1e-4, 1e-3, 0.01, 0.1, 0.3}) {
      ++checked;
      const WarpedMetric m = make_metric(flare_spec(s));
      const double t0 = 40, t1 = window_end(m, t0, 1.02 * k.L0);
      if (!std::isfinite(t1)) continue;
      const NeckCertificate nc = certify_neck(m, t0, t1, k.k0);
      if (!(nc.eps <= k.eps0 && nc.L >= k.L0)) continue;
      ++certified;
      const double measured = ascr_profile(m, log_grid(1, 1e3 / s, 10)).ascr_estimate;
      if (!(bound <= measured)) ++unsound;
      slack = std::min(slack, measured / std::max(bound, 1e-300));
    }
    // The cylinder certifies every threshold and its ASCR diverges.
    ++checked;
    const WarpedMetric cyl = make_metric(cylinder_spec(1, 0, kInf));
    const NeckCertificate nc = certify_neck(cyl, 10, 10 + 2.1 * k.L0, k.k0);
    if (nc.eps <= k.eps0 && nc.L >= k.L0) {
      ++certified;
      if (!(bound <= ascr_profile(cyl, grid).ascr_estimate)) ++unsound;
    }
  }
  r.pass = round_trip && mono && unsound == 0 && certified > 0;
  const std::string sl = std::isfinite(slack) ? fmt("smallest measured/bound %.3g", slack)
                                               : std::string("every certified ASCR diverges");
  r.margin = fmt("unsound presets %d == 0 (%s); round trip min bound/C0 %.4g >= 1; monotone: %s",
                 unsound, sl.c_str(), rt_worst, mono ? "yes" : "no");
  r.detail = fmt("%d of %d (preset, C0) pairs certify at (eps0, k0, L0) for C0 in {0 (floor), "
                 "1, 10, 100, 1e3}",
                 certified, checked);
  r.limit_seconds = 10;
  return r;
}

}  // namespace

std::vector<int> suite_criteria(const std::string& name) {
  if (name == "quick") return {1, 3, 4, 7, 9, 12};
  if (name == "full") return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  fail(Errc::InvalidInput, "unknown suite: " + name + " (quick | full)");
}

std::string criterion_name(int id) {
  static const char* names[] = {"",
                                "neck exactness",
                                "absolute-neck soundness",
                                "ASCR closed form",
                                "AVR closed forms",
                                "Bishop-Gromov monotonicity",
                                "relative volume across a neck",
                                "Gauss-Bonnet",
                                "P lower bound",
                                "dichotomy algebra",
                                "flow exactness",
                                "neckpinch signature",
                                "chain soundness"};
  if (id < 1 || id > kCriteria) fail(Errc::InvalidInput, "criterion id out of range");
  return names[id];
}

bool known_failure(int id) { return id == 11; }

CriterionResult run_criterion(int id, const SuiteOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  switch (id) {
    case 1: r = neck_exactness(); break;
    case 2: r = absolute_soundness(); break;
    case 3: r = ascr_closed_form(); break;
    case 4: r = avr_closed_form(); break;
    case 5: r = bishop_gromov(opt); break;
    case 6: r = relative_volume(opt); break;
    case 7: r = gauss_bonnet(); break;
    case 8: r = p_lower_bound(opt); break;
    case 9: r = dichotomy(opt); break;
    case 10: r = flow_exactness(); break;
    case 11: r = neckpinch(); break;
    case 12: r = soundness(); break;
    default: fail(Errc::InvalidInput, "criterion id out of range");
  }
  r.id = id;
  r.name = criterion_name(id);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (r.limit_seconds > 0 && r.seconds > r.limit_seconds) {
    r.pass = false;
    r.margin += fmt("; runtime %.1f s over the %.0f s limit", r.seconds, r.limit_seconds);
  }
  return r;
}

std::string criterion_line(const CriterionResult& r) {
  std::string lim = r.limit_seconds > 0 ? fmt(" (limit %.0f s)", r.limit_seconds) : "";
  return fmt("criterion %2d %s %s | %s | %s | %.2f s%s", r.id, r.pass ? "PASS" : "FAIL",
             r.name.c_str(), r.margin.c_str(), r.detail.c_str(), r.seconds, lim.c_str());
}

std::string suite_summary_csv(const std::vector<CriterionResult>& rs) {
  auto q = [](const std::string& s) {
    std::string o = "\"";
    for (char c : s) o += c == '"' ? std::string("\"\"") : std::string(1, c);
    return o + "\"";
  };
  std::string out = "id,name,status,margin,detail\n";
  for (const CriterionResult& r : rs)
    out += std::to_string(r.id) + "," + q(r.name) + "," + (r.pass ? "PASS" : "FAIL") + "," +
           q(r.margin) + "," + q(r.detail) + "\n";
  return out;
}

}  // namespace neckscope
