#include "neckscope/curvature_pinching.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "neckscope/error.hpp"
#include "neckscope/numerics.hpp"

namespace neckscope {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_params(const EigenTriple& e, double t, double gamma, double eps) {
  if (!(t < 0)) fail(Errc::InvalidInput, "need t < 0");
  if (!(gamma > 0)) fail(Errc::InvalidInput, "need gamma > 0");
  if (!(eps > 0 && eps <= 1)) fail(Errc::InvalidInput, "need 0 < eps <= 1");
  if (!(e.R() > 0)) fail(Errc::RequiresPositiveScalar, "scalar curvature must be positive");
}

using Vec3 = Eigen::Matrix<double, 3, 1>;

Vec3 reaction(const Vec3& y) {
  return {y(0) * y(0) + y(1) * y(2), y(1) * y(1) + y(0) * y(2), y(2) * y(2) + y(0) * y(1)};
}

}  // namespace

EigenTriple::EigenTriple(double a, double b, double c) {
  std::array<double, 3> v{a, b, c};
  std::sort(v.begin(), v.end(), [](double x, double y) {
    return std::abs(x) > std::abs(y) || (std::abs(x) == std::abs(y) && x > y);
  });
  lambda = v[0];
  mu = v[1];
  nu = v[2];
}

double EigenTriple::norm() const { return std::sqrt(norm2()); }

double EigenTriple::traceless2() const {
  const double a = lambda - mu, b = lambda - nu, c = mu - nu;
  return (a * a + b * b + c * c) / 3;
}

double EigenTriple::largest() const { return std::max({lambda, mu, nu}); }
double EigenTriple::smallest() const { return std::min({lambda, mu, nu}); }

double p_quantity(const EigenTriple& e) {
  const double l = e.lambda, m = e.mu, n = e.nu;
  return l * l * (m - n) * (m - n) + m * m * (l - n) * (l - n) + n * n * (l - m) * (l - m);
}

double necklike_delta(const EigenTriple& e) {
  const double N2 = e.norm2();
  if (!(N2 > 0)) fail(Errc::Undefined, "necklike delta undefined at zero curvature");
  // |Rm - R theta⊗theta|^2 = |Rm|^2 - 2R <Rm theta, theta> + R^2 over unit theta:
  // extremal eigenvalue chosen by the sign of R.
  const double R = e.R();
  const double top = R >= 0 ? e.largest() : e.smallest();
  const double num = N2 - 2 * R * top + R * R;
  return std::sqrt(std::max(0.0, num / N2));
}

double max_admissible_delta(const EigenTriple& e) {
  const double N2 = e.norm2();
  if (!(N2 > 0)) return 0;
  const double h = e.mu * e.mu + e.nu * e.nu + e.mu * e.nu;
  return std::min(1.0, 2 * h / N2);
}

double pinching_eta(double delta) { return delta / (96 * (3 - delta)); }

LemmaCResult lemma_c_check(const EigenTriple& e, double delta) {
  if (!(delta > 0 && delta <= 1)) fail(Errc::InvalidInput, "need delta in (0,1]");
  LemmaCResult r;
  r.delta = delta;
  const double N2 = e.norm2();
  r.hyp_lhs = e.mu * e.mu + e.nu * e.nu + e.mu * e.nu;
  r.hyp_rhs = delta / 2 * N2;
  r.P = p_quantity(e);
  r.rhs = pinching_eta(delta) * N2 * e.traceless2();
  r.ratio = r.rhs > 0 ? r.P / r.rhs : (r.P > 0 ? kInf : 1.0);
  // Relative slack so delta = max_admissible_delta(e) is admitted despite rounding.
  if (!(N2 > 0) || r.hyp_lhs < r.hyp_rhs * (1 - 1e-14)) {
    r.status = LemmaStatus::NotApplicable;
    return r;
  }
  r.status = r.P >= r.rhs ? LemmaStatus::Pass : LemmaStatus::Fail;
  return r;
}

double g_quantity(const EigenTriple& e, double t, double gamma, double eps) {
  check_params(e, t, gamma, eps);
  return std::pow(-t, gamma * eps / 2) * e.traceless2() / std::pow(e.R(), 2 - eps);
}

double j_quantity(const EigenTriple& e, double t, double gamma, double eps) {
  check_params(e, t, gamma, eps);
  const double R = e.R();
  const double bracket =
      eps * e.traceless2() * (e.norm2() - gamma * R / (4 * -t)) - p_quantity(e);
  return std::pow(-t, gamma * eps / 2) / std::pow(R, 3 - eps) * bracket;
}

double g_reaction_derivative(const EigenTriple& e, double t, double gamma, double eps) {
  check_params(e, t, gamma, eps);
  const double R = e.R();
  const double G = g_quantity(e, t, gamma, eps);
  // R (|Rm°|^2)' - 2 |Rm°|^2 R' = -2P and R' = (|Rm|^2 + R^2)/2 along the ODE.
  const double rest = eps * e.traceless2() * (e.norm2() + R * R) / 2 - 2 * p_quantity(e);
  return -gamma * eps / (2 * -t) * G + std::pow(-t, gamma * eps / 2) / std::pow(R, 3 - eps) * rest;
}

PinchReport pinch_report(const EigenTriple& e, double t, double gamma, double eps, double c,
                         double delta) {
  PinchReport p;
  p.P = p_quantity(e);
  p.delta_star = necklike_delta(e);
  p.G = g_quantity(e, t, gamma, eps);
  p.J = j_quantity(e, t, gamma, eps);
  p.t = t;
  p.gamma = gamma;
  p.eps = eps;
  p.c = c;
  p.delta = delta;
  return p;
}

std::string_view alternative_name(Alternative a) {
  switch (a) {
    case Alternative::NotEssential: return "not_essential";
    case Alternative::NotNecklike: return "not_necklike";
    case Alternative::NotClassified: return "unclassified";
  }
  return "unclassified";
}

Alternative classify(const EigenTriple& e, double t, double c, double delta) {
  if (e.norm() * std::abs(t) < c) return Alternative::NotEssential;
  if (e.norm2() > 0 && necklike_delta(e) > delta) return Alternative::NotNecklike;
  return Alternative::NotClassified;
}

DichotomyResult dichotomy_check(const EigenTriple& e, double t, double c, double delta,
                                double gamma, double eps, double eta) {
  check_params(e, t, gamma, eps);
  if (!e.nonnegative()) fail(Errc::HypothesisFail, "eigenvalues must be nonnegative");
  if (!(c > 0 && c <= gamma / 8)) fail(Errc::InvalidInput, "need 0 < c <= gamma/8");
  if (!(delta > 0 && delta < 1)) fail(Errc::InvalidInput, "need delta in (0,1)");
  if (eta <= 0) eta = pinching_eta(delta);
  if (!(eps <= eta)) fail(Errc::InvalidInput, "need eps <= eta(delta)");
  DichotomyResult d;
  d.alt = classify(e, t, c, delta);
  if (d.alt == Alternative::NotClassified)
    fail(Errc::NotClassified, "point is essential and delta-necklike");
  d.G = g_quantity(e, t, gamma, eps);
  d.J = j_quantity(e, t, gamma, eps);
  const double k = d.alt == Alternative::NotEssential ? 8 : 4;
  d.bound = -gamma * eps / (k * -t) * d.G;
  d.margin = d.bound - d.J;
  // Both sides are sums of a few rounded products.
  const double tol = 1e-13 * (std::abs(d.J) + std::abs(d.bound));
  d.pass = d.margin >= -tol;
  return d;
}

Trajectory integrate_curvature_ode(const EigenTriple& e0, double t0, double t1,
                                   const OdeOptions& opt) {
  if (!(t1 > t0)) fail(Errc::InvalidRange, "need t1 > t0");
  DormandPrince<3> dp;
  dp.rhs = [](double, const Vec3& y) { return reaction(y); };
  dp.rtol = opt.rtol;
  dp.atol = opt.atol;

  Trajectory tr;
  auto record = [&](double t, const Vec3& y) {
    OdeSample s;
    s.t = t;
    s.e = EigenTriple(y(0), y(1), y(2));
    if (t < 0 && s.e.R() > 0) {
      s.classified = true;
      s.G = g_quantity(s.e, t, opt.gamma, opt.eps);
      s.J = j_quantity(s.e, t, opt.gamma, opt.eps);
      s.dGdt = g_reaction_derivative(s.e, t, opt.gamma, opt.eps);
      s.alt = classify(s.e, t, opt.c, opt.delta);
    } else {
      s.G = s.J = s.dGdt = kNaN;
    }
    if (e0.nonnegative() && !s.e.nonnegative()) tr.stayed_nonnegative = false;
    tr.samples.push_back(s);
  };

  Vec3 y(e0.lambda, e0.mu, e0.nu);
  double t = t0;
  const double rm0 = y.norm();
  double h = opt.h0 > 0 ? opt.h0 : std::min(t1 - t0, rm0 > 0 ? 1e-3 / rm0 : t1 - t0);
  record(t, y);
  while (t < t1) {
    if (y.norm() > opt.blowup) {
      tr.blew_up = true;
      break;
    }
    const double cap = opt.hmax > 0 ? std::min(opt.hmax, t1 - t) : t1 - t;
    if (!dp.step(t, y, h, cap)) {
      tr.blew_up = true;
      break;
    }
    if (t1 - t < 1e-15 * std::max(1.0, std::abs(t1))) t = t1;
    record(t, y);
  }
  if (tr.blew_up) {
    // Near blowup the dominant eigenvalue behaves like k/(T - t).
    const Vec3 dy = reaction(y);
    int i = 0;
    y.cwiseAbs().maxCoeff(&i);
    tr.blowup_time = dy(i) != 0 ? t + y(i) / dy(i) : t;
  }
  return tr;
}

std::string trajectory_csv_header() { return "t,lambda,mu,nu,R,G,J,class"; }

std::string trajectory_csv_row(const OdeSample& s) {
  char b[320];
  std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s", s.t, s.e.lambda,
                s.e.mu, s.e.nu, s.e.R(), s.G, s.J,
                s.classified ? std::string(alternative_name(s.alt)).c_str() : "none");
  return b;
}

}  // namespace neckscope
