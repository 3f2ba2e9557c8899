#include "neckscope/neck_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "neckscope/jet.hpp"

namespace neckscope {

namespace {

WarpSpec unit_scale(WarpSpec s) {
  const double k = s.scale;
  s.t_min /= k;
  if (std::isfinite(s.t_max)) s.t_max /= k;
  s.scale = 1;
  return s;
}

constexpr int kJetOrder = kMaxNeckOrder + 2;

// D^j log phi for j = 1..k, with D = phi d/dt the z-derivative.
std::array<double, kMaxNeckOrder + 1> logr_derivatives(const WarpedMetric& m, double t, int k) {
  const Jet<double, kJetOrder> P = m.eval<kJetOrder>(t);
  std::array<double, kMaxNeckOrder + 1> out{};
  Jet<double, kJetOrder> f = P.derivative();
  out[1] = f.c[0];
  for (int j = 2; j <= k; ++j) {
    f = P * f.derivative();
    out[j] = f.c[0];
  }
  return out;
}

int validate_order(int k) {
  if (k < 1 || k > kMaxNeckOrder)
    fail(Errc::InvalidInput, "derivative order must be in [1, " +
                                 std::to_string(kMaxNeckOrder) + "]");
  return k;
}

bool stable(double prev, double cur) {
  const double s = std::max(std::abs(prev), std::abs(cur));
  return s == 0 || std::abs(cur - prev) <= 0.01 * s;
}

}  // namespace

NeckWindow::NeckWindow(const WarpedMetric& m, double t0, double t1)
    : m_(make_metric(unit_scale(m.spec()))), scale_(m.spec().scale) {
  if (!(std::isfinite(t0) && std::isfinite(t1) && t0 < t1))
    fail(Errc::InvalidWindow, "window needs finite t0 < t1");
  if (!m.contains(t0) || !m.contains(t1))
    fail(Errc::OutOfDomain, "window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                                "] leaves the domain");
  t0_ = t0 / scale_;
  t1_ = t1 / scale_;
  if (!(m_.phi(t0_) > 0) || !(m_.phi(t1_) > 0))
    fail(Errc::InvalidWindow, "phi must be positive on the window");
  a_ = z_base(t0_);
  b_ = z_base(t1_);
}

double NeckWindow::z_of_t(double t) const { return z_base(t / scale_); }

double NeckWindow::z_base(double tb) const {
  if (!(tb >= t0_ - 1e-12 * (1 + std::abs(t0_)) && tb <= t1_ + 1e-12 * (1 + std::abs(t1_))))
    fail(Errc::OutOfDomain, "t outside the window");
  const double tm = 0.5 * (t0_ + t1_);
  const double guess = (tb - tm) / m_.phi(tm);
  return integrate([&](double s) { return 1.0 / m_.phi(s); }, tm, tb,
                   1e-14 * (1 + std::abs(guess)));
}

double NeckWindow::t_of_z(double z) const { return t_base(z) * scale_; }

double NeckWindow::t_base(double z) const {
  if (!(z >= a_ - 1e-12 && z <= b_ + 1e-12)) fail(Errc::OutOfDomain, "z outside the window");
  double lo = t0_, hi = t1_;
  double t = std::clamp(0.5 * (t0_ + t1_) + z * m_.phi(0.5 * (t0_ + t1_)), lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double g = z_base(t) - z;
    if (g > 0) hi = t;
    else lo = t;
    double next = t - g * m_.phi(t);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-15 * (1 + std::abs(t)) || hi - lo <= 1e-15 * (1 + std::abs(t)))
      return next;
    t = next;
  }
  return t;
}

double NeckWindow::r_of_z(double z) const { return m_.phi(t_base(z)) * scale_; }

double NeckWindow::slab_volume(double z, double w) const {
  if (z > w) std::swap(z, w);
  const int n = m_.n();
  const double tz = t_base(z);
  // Integrate r^n in z by stepping t(z) along the ODE dt/dz = phi.
  DormandPrince<2> dp;
  dp.rtol = 1e-12;
  dp.atol = 1e-14;
  dp.rhs = [&](double, const Eigen::Vector2d& y) {
    const double p = m_.phi(y(0));
    return Eigen::Vector2d(p, std::pow(p, n));
  };
  Eigen::Vector2d y(tz, 0.0);
  double s = z, h = 1e-2 * (w - z);
  while (s < w) {
    if (!dp.step(s, y, h, w - s)) fail(Errc::NoConvergence, "slab volume integration failed");
  }
  return sphere_volume(n - 1) * y(1) * std::pow(scale_, n);
}

std::vector<double> NeckWindow::t_grid(int points) const {
  if (points < 2) fail(Errc::InvalidInput, "grid needs at least 2 points");
  std::vector<double> zs(points), ts(points);
  for (int i = 0; i < points; ++i) zs[i] = a_ + (b_ - a_) * i / (points - 1);
  zs.back() = b_;
  DormandPrince<1> dp;
  dp.rtol = 1e-13;
  dp.atol = 1e-15 * (1 + std::abs(t1_));
  // March away from z = 0 in both directions; sign flips the integration variable.
  auto march = [&](double sign, int first, int last, int stepi) {
    dp.rhs = [&](double, const Eigen::Matrix<double, 1, 1>& y) {
      return Eigen::Matrix<double, 1, 1>(sign * m_.phi(y(0)));
    };
    Eigen::Matrix<double, 1, 1> y;
    y(0) = 0.5 * (t0_ + t1_);
    double s = 0, h = 1e-3 * (b_ - a_);
    for (int i = first; i != last; i += stepi) {
      const double target = sign * zs[i];
      while (s < target) {
        if (!dp.step(s, y, h, target - s)) fail(Errc::NoConvergence, "z-grid integration failed");
      }
      ts[i] = std::clamp(y(0), t0_, t1_);
    }
  };
  int first_pos = 0;
  while (first_pos < points && zs[first_pos] < 0) ++first_pos;
  march(1.0, first_pos, points, 1);
  march(-1.0, first_pos - 1, -1, -1);
  ts.front() = t0_;
  ts.back() = t1_;
  return ts;
}

NeckWindow normalize_parametrization(const WarpedMetric& m, double t0, double t1) {
  return NeckWindow(m, t0, t1);
}

bool stricter_or_equal(const NeckRequirement& r1, const NeckRequirement& r2) {
  return r1.eps <= r2.eps && r1.k >= r2.k && r1.L >= r2.L;
}

bool satisfies(const NeckCertificate& c, const NeckRequirement& req) {
  if (req.k > c.k || req.k < 1) return false;
  if (c.L < req.L) return false;
  double e = c.eps_conformal;
  for (int j = 1; j <= req.k; ++j) e = std::max(e, c.eps_by_order[j - 1]);
  return e <= req.eps;
}

NeckCertificate certify_neck(const WarpedMetric& m, double t0, double t1, int k) {
  validate_order(k);
  const NeckWindow w(m, t0, t1);
  NeckCertificate c;
  c.a = w.a();
  c.b = w.b();
  c.t0 = t0;
  c.t1 = t1;
  c.k = k;
  c.L = w.half_length();
  // In z the conformal metric r^-2 g is exactly the product metric.
  c.eps_conformal = 0;
  std::vector<double> prev;
  for (int points = 512;; points = 2 * points - 1) {
    const std::vector<double> ts = w.t_grid(points);
    std::vector<double> sup(k, 0.0);
    for (double t : ts) {
      const auto d = logr_derivatives(w.metric(), t, k);
      for (int j = 1; j <= k; ++j) sup[j - 1] = std::max(sup[j - 1], std::abs(d[j]));
    }
    c.grid_points = points;
    const bool done = !prev.empty() &&
                      std::equal(prev.begin(), prev.end(), sup.begin(), stable);
    prev = sup;
    if (done || points > 40000) break;
  }
  c.eps_by_order = prev;
  c.eps_logr = *std::max_element(prev.begin(), prev.end());
  c.eps = std::max(c.eps_conformal, c.eps_logr);
  return c;
}

NeckCertificate certify_neck(const WarpedMetric& m, double t0, double t1,
                             const NeckRequirement& req) {
  NeckCertificate c = certify_neck(m, t0, t1, validate_order(req.k));
  c.pass = satisfies(c, req);
  return c;
}

AbsoluteNeckCertificate certify_absolute_neck(const WarpedMetric& m, double t0, double t1,
                                              int k) {
  validate_order(k);
  const NeckWindow w(m, t0, t1);
  const WarpedMetric& mb = w.metric();
  AbsoluteNeckCertificate c;
  c.a = w.a();
  c.b = w.b();
  c.t0 = t0;
  c.t1 = t1;
  c.k = k;
  c.L = w.half_length();
  const double t_mid_z = w.t_base(0.5 * (c.a + c.b));
  const double log_rmid = std::log(mb.phi(t_mid_z));
  c.r_mid = mb.phi(t_mid_z) * m.spec().scale;
  const double sqn = std::sqrt(static_cast<double>(mb.n()));
  std::vector<double> prev;
  for (int points = 512;; points = 2 * points - 1) {
    const std::vector<double> ts = w.t_grid(points);
    std::vector<double> sup(k + 1, 0.0);
    for (double t : ts) {
      const auto d = logr_derivatives(mb, t, k);
      // u = r^2 / r_mid^2 as a Taylor series in z.
      Jet<double, kMaxNeckOrder> R;
      R.c[0] = 2 * (std::log(mb.phi(t)) - log_rmid);
      double fact = 1;
      for (int j = 1; j <= k; ++j) {
        fact *= j;
        R.c[j] = 2 * d[j] / fact;
      }
      const Jet<double, kMaxNeckOrder> U = exp(R);
      sup[0] = std::max(sup[0], sqn * std::abs(U.c[0] - 1));
      for (int j = 1; j <= k; ++j) sup[j] = std::max(sup[j], sqn * std::abs(U.deriv(j)));
    }
    c.grid_points = points;
    const bool done = !prev.empty() &&
                      std::equal(prev.begin(), prev.end(), sup.begin(), stable);
    prev = sup;
    if (done || points > 40000) break;
  }
  c.eps_metric = prev[0];
  c.eps_by_order.assign(prev.begin() + 1, prev.end());
  c.eps_abs = *std::max_element(prev.begin(), prev.end());
  return c;
}

const std::array<double, kMaxNeckOrder + 1>& derivative_chain_constants() {
  static const std::array<double, kMaxNeckOrder + 1> bell{1, 1, 2, 5, 15, 52, 203};
  return bell;
}

// alpha_j = 1 + sum_{i=1}^{j-1} C(j,i) B_i, beta_j = 2 B_j.
const std::array<ConversionCoefficients, kMaxNeckOrder + 1>& conversion_table() {
  static const std::array<ConversionCoefficients, kMaxNeckOrder + 1> table{{
      {0, 0},
      {1, 2},
      {3, 4},
      {10, 10},
      {37, 30},
      {151, 104},
      {674, 406},
  }};
  return table;
}

double conversion_constant(int k, int n) {
  validate_order(k);
  if (n < 1) fail(Errc::InvalidInput, "dimension must be positive");
  // |r^-2 g| <= sqrt(n) + e' with e' <= 1/2
  const double metric_norm = std::sqrt(static_cast<double>(n)) + 0.5;
  double c = 0;
  for (int j = 1; j <= k; ++j) {
    const auto& e = conversion_table()[j];
    c = std::max(c, e.alpha + e.beta * metric_norm);
  }
  return c;
}

double conversion_constant_dimension_free(int k) {
  validate_order(k);
  double c = 0;
  for (int j = 1; j <= k; ++j) {
    const auto& e = conversion_table()[j];
    c = std::max(c, e.alpha + e.beta);
  }
  return c;
}

namespace {

void validate_conversion_args(double eps, int k, double L, int n) {
  if (!(eps > 0)) fail(Errc::InvalidInput, "eps must be positive");
  if (!(L > 0)) fail(Errc::InvalidInput, "L must be positive");
  if (n < 1) fail(Errc::InvalidInput, "dimension must be positive");
  validate_order(k);
}

double linear_factor(int k, double L, int n) {
  return std::min(1.0 / (conversion_constant(k, n) * (1 + 4 * L)),
                  1.0 / (1 + 8 * L * std::sqrt(static_cast<double>(n))));
}

double caps(double L) { return std::min(0.5, std::log(2.0) / (2 * L)); }

}  // namespace

double epsilon_prime(double eps, int k, double L, int n) {
  validate_conversion_args(eps, k, L, n);
  return std::min(caps(L), eps * linear_factor(k, L, n));
}

double epsilon_for_neck(double eps_neck, int k, double L, int n) {
  if (!(eps_neck >= 0)) fail(Errc::InvalidInput, "neck eps must be nonnegative");
  validate_conversion_args(1.0, k, L, n);
  if (eps_neck > caps(L)) return std::numeric_limits<double>::infinity();
  if (eps_neck == 0) return 0;
  double eps = eps_neck / linear_factor(k, L, n);
  while (epsilon_prime(eps, k, L, n) < eps_neck) eps = std::nextafter(eps, 2 * eps);
  return eps;
}

ConversionReport verify_absolute_conversion(const WarpedMetric& m, double t0, double t1, int k,
                                            double eps) {
  ConversionReport rep;
  rep.neck = certify_neck(m, t0, t1, k);
  const double L = rep.neck.L;
  const int n = m.n();
  rep.eps = eps > 0 ? eps : epsilon_for_neck(rep.neck.eps, k, L, n);
  if (!std::isfinite(rep.eps)) {
    rep.applicable = false;
    rep.pass = true;
    rep.margin = std::numeric_limits<double>::infinity();
    return rep;
  }
  rep.eps_prime = rep.eps > 0 ? epsilon_prime(rep.eps, k, L, n) : 0;
  rep.applicable = rep.neck.eps <= rep.eps_prime;
  rep.absolute = certify_absolute_neck(m, t0, t1, k);
  rep.margin = rep.eps - rep.absolute.eps_abs;
  rep.pass = rep.eps_prime <= rep.eps && (!rep.applicable || rep.margin >= 0);
  return rep;
}

std::string neck_csv_header() { return "a,b,k,L,eps_conformal,eps_logr,eps,pass"; }

std::string neck_csv_row(const NeckCertificate& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%d", c.a, c.b, c.k,
                c.L, c.eps_conformal, c.eps_logr, c.eps, c.pass ? 1 : 0);
  return buf;
}

}  // namespace neckscope
