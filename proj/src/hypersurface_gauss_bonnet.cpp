#include "neckscope/hypersurface_gauss_bonnet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "neckscope/asymptotic_invariants.hpp"
#include "neckscope/error.hpp"

namespace neckscope {

namespace {

void require_pole(const WarpedMetric& m) {
  if (!m.spec().pole_min) fail(Errc::RequiresPole, "parallel surfaces need a pole at t_min");
}

double max_binomial(int m) {
  double best = 0, b = 1;
  for (int p = 1; p <= m; ++p) {
    b = b * (m - p + 1) / p;
    best = std::max(best, b);
  }
  return best;
}

// sum_{p=1}^m a^{2p}
double power_sum(double a, int m) {
  double s = 0;
  for (int p = 1; p <= m; ++p) s += std::pow(a, 2 * p);
  return s;
}

struct DecayData {
  double a = 0;
  double rho_max = 0;
};

DecayData decay_at(const WarpedMetric& m, double r) {
  AscrProfile p = ascr_profile(m, {r});
  DecayData d;
  d.a = std::sqrt(p.a2[0]);
  d.rho_max = p.rho[0];
  return d;
}

}  // namespace

double gauss_bonnet_constant(int n) {
  if (n < 3) fail(Errc::InvalidInput, "dimension must be >= 3");
  if (n % 2 == 0) fail(Errc::OddDimensionOnly, "c(n) is defined for odd n");
  return max_binomial((n - 1) / 2);
}

double ambient_curvature_sup(const WarpedMetric& m, double r) {
  const double sc = m.spec().scale;
  const double lo = m.t_min() + std::max(r, 1e-6 * sc);
  double hi = m.t_max();
  if (m.spec().pole_max) hi -= 1e-6 * sc;
  if (!std::isfinite(hi)) hi = lo + 1e6 * sc;
  if (!(hi > lo)) return 0;
  double sup = -kInf;
  auto probe = [&](double t) {
    const CurvatureSample c = curvature_at(m, t);
    sup = std::max({sup, c.K_rad, c.K_sph});
  };
  const double near = std::min(hi, lo + 50 * sc);
  const int N = 4000;
  for (int i = 0; i <= N; ++i) probe(lo + (near - lo) * i / N);
  if (hi > near) {
    const int G = 400;
    const double q = std::log(hi / near);
    if (near > 0 && q > 0)
      for (int i = 1; i <= G; ++i) probe(near * std::exp(q * i / G));
  }
  return sup;
}

ParallelSurface parallel_surface(const WarpedMetric& m, double r, double rho,
                                 bool enforce_window) {
  require_pole(m);
  if (!(r >= 0 && rho > 0)) fail(Errc::InvalidRange, "need r >= 0 and rho > 0");
  const double t = m.t_min() + r + rho;
  if (!m.contains(t) || (m.spec().pole_max && t >= m.t_max()))
    fail(Errc::OutOfDomain, "r + rho leaves the domain");
  ParallelSurface s;
  s.r = r;
  s.rho = rho;
  s.t = t;
  s.n = m.n();
  const double Ksup = ambient_curvature_sup(m, r);
  s.eps_K = Ksup > 0 ? std::sqrt(Ksup) : 0.0;
  if (enforce_window && s.eps_K > 0 && !(rho < std::numbers::pi / (2 * s.eps_K))) {
    char b[160];
    std::snprintf(b, sizeof b, "rho = %.6g outside the smooth window rho < pi/(2 eps_K) = %.6g",
                  rho, std::numbers::pi / (2 * s.eps_K));
    fail(Errc::NotSmooth, b);
  }
  const auto j = m.eval<2>(t);
  s.phi = j.c[0];
  s.kappa = j.c[1] / j.c[0];
  const CurvatureSample c = curvature_at(m, t);
  s.K_sph = c.K_sph;
  s.K_rad = c.K_rad;
  return s;
}

WeingartenCheck weingarten_bound_check(const WarpedMetric& m, double r, double rho,
                                       double eps_K) {
  require_pole(m);
  if (!(eps_K >= 0)) fail(Errc::InvalidInput, "eps_K must be >= 0");
  const double Ksup = ambient_curvature_sup(m, r);
  // Sampled curvature carries rounding noise, worst next to a pole.
  if (Ksup > eps_K * eps_K * (1 + 1e-8) + 1e-12) {
    char b[128];
    std::snprintf(b, sizeof b, "sup K = %.6g exceeds eps_K^2 = %.6g", Ksup, eps_K * eps_K);
    fail(Errc::HypothesisFail, b);
  }
  if (eps_K > 0 && !(rho < std::numbers::pi / (2 * eps_K)))
    fail(Errc::NotSmooth, "rho outside the smooth window");
  const double t = m.t_min() + r + rho;
  if (!m.contains(t)) fail(Errc::OutOfDomain, "r + rho leaves the domain");
  const auto j = m.eval<1>(t);
  WeingartenCheck w;
  w.kappa = j.c[1] / j.c[0];
  w.lower = -eps_K * std::tan(eps_K * rho);
  w.upper = 1 / rho;
  w.lower_margin = w.kappa - w.lower;
  w.upper_margin = w.upper - w.kappa;
  // The flat case attains the upper bound; allow rounding there.
  const double tol = 1e-14 * std::max(1.0, std::abs(w.upper));
  w.pass = w.lower_margin >= -tol && w.upper_margin >= -tol;
  return w;
}

GBReport gauss_bonnet_integrand(const WarpedMetric& m, const ParallelSurface& s) {
  const int n = m.n();
  if (n % 2 == 0) fail(Errc::OddDimensionOnly, "Gauss-Bonnet integrand needs odd n");
  GBReport g;
  g.m = (n - 1) / 2;
  const double k2 = s.kappa * s.kappa;
  g.k_int = s.K_sph + k2;
  g.G = std::pow(g.k_int, g.m);
  g.detL = std::pow(k2, g.m);
  g.Q = g.G - g.detL;
  g.area = sphere_volume(n - 1) * std::pow(s.phi, n - 1);
  g.total = g.G * g.area;
  return g;
}

QBoundCheck q_bound_check(const WarpedMetric& m, double r, double rho, double eta2,
                          double c_n) {
  if (!(eta2 > 0 && eta2 <= 1)) fail(Errc::InvalidInput, "eta2 must be in (0,1]");
  if (!(r >= eta2)) fail(Errc::InvalidRange, "need r >= eta2");
  const int n = m.n();
  const double c = c_n > 0 ? c_n : gauss_bonnet_constant(n);
  const int mm = (n - 1) / 2;
  const DecayData d = decay_at(m, r - eta2);
  QBoundCheck q;
  q.a = d.a;
  q.rho_max = d.rho_max;
  if (rho > d.rho_max) fail(Errc::InvalidRange, "rho exceeds rho(r - eta2)");
  const GBReport g = gauss_bonnet_integrand(m, parallel_surface(m, r, rho));
  q.Q = g.Q;
  const double sum = power_sum(d.a, mm);
  const double scale = std::pow(rho, -(n - 1)) * sum;
  q.bound = c * scale;
  q.fitted_c = scale > 0 ? std::abs(g.Q) / scale : (g.Q == 0 ? 0.0 : kInf);
  q.pass = std::abs(q.Q) <= q.bound;
  return q;
}

AreaBoundCheck area_lower_bound_check(const WarpedMetric& m, double r, double rho,
                                      double eta2, double c_n) {
  if (!(r >= 1)) fail(Errc::InvalidRange, "need r >= 1");
  if (!(eta2 > 0 && eta2 <= 1)) fail(Errc::InvalidInput, "eta2 must be in (0,1]");
  require_pole(m);
  const int n = m.n();
  const double c = c_n > 0 ? c_n : gauss_bonnet_constant(n);
  const int mm = (n - 1) / 2;
  const DecayData d = decay_at(m, r - eta2);
  if (rho > d.rho_max) fail(Errc::InvalidRange, "rho exceeds rho(r - eta2)");
  const double t = m.t_min() + r + rho;
  if (!m.contains(t)) fail(Errc::OutOfDomain, "r + rho leaves the domain");
  const double omega = sphere_volume(n - 1);
  const double denom = c * power_sum(d.a, mm) + 1;
  AreaBoundCheck a;
  a.r = r;
  a.rho = rho;
  a.area = omega * std::pow(m.phi(t), n - 1);
  a.bound = omega * std::pow(rho, n - 1) / denom;
  a.margin = a.area - a.bound;
  const double t0 = m.t_min() + r;
  const double tol = 1e-10 * omega * std::pow(std::max(m.phi(t), m.phi(t0)), n - 1) * rho;
  a.volume = omega * integrate([&](double s) { return std::pow(m.phi(s), n - 1); }, t0, t, tol);
  a.volume_bound = omega / n * std::pow(rho, n) / denom;
  a.volume_margin = a.volume - a.volume_bound;
  a.pass = a.margin >= 0 && a.volume_margin >= 0;
  return a;
}

std::string area_csv_header() { return "r,rho,area,bound,margin,pass"; }

std::string area_csv_row(const AreaBoundCheck& c) {
  char b[256];
  std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g,%.17g,%.17g,%d", c.r, c.rho, c.area, c.bound,
                c.margin, c.pass ? 1 : 0);
  return b;
}

}  // namespace neckscope
