#include "neckscope/warped_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

namespace neckscope {

std::string family_name(Family f) {
  switch (f) {
    case Family::Cylinder: return "cylinder";
    case Family::Flat: return "flat";
    case Family::Sphere: return "sphere";
    case Family::Flare: return "flare";
    case Family::Dumbbell: return "dumbbell";
    case Family::Sampled: return "sampled";
  }
  return "unknown";
}

WarpSpec cylinder_spec(double c, double t_min, double t_max, int n) {
  WarpSpec s;
  s.family = Family::Cylinder;
  s.c = c;
  s.n = n;
  s.t_min = t_min;
  s.t_max = t_max;
  return s;
}

WarpSpec flat_spec(int n, double t_max) {
  WarpSpec s;
  s.family = Family::Flat;
  s.n = n;
  s.t_min = 0;
  s.t_max = t_max;
  s.pole_min = true;
  return s;
}

WarpSpec sphere_spec(double a, int n) {
  WarpSpec s;
  s.family = Family::Sphere;
  s.a = a;
  s.n = n;
  s.t_min = 0;
  s.t_max = a * std::numbers::pi;
  s.pole_min = s.pole_max = true;
  return s;
}

WarpSpec flare_spec(double sigma, int n, double t_max) {
  WarpSpec s;
  s.family = Family::Flare;
  s.sigma = sigma;
  s.n = n;
  s.t_min = 0;
  s.t_max = t_max;
  s.pole_min = true;
  return s;
}

WarpSpec dumbbell_spec(double A, int n) {
  WarpSpec s;
  s.family = Family::Dumbbell;
  s.A = A;
  s.n = n;
  s.t_min = 0;
  s.t_max = std::numbers::pi;
  s.pole_min = s.pole_max = true;
  return s;
}

WarpSpec sampled_spec(const Eigen::VectorXd& t, const Eigen::VectorXd& phi, int n) {
  if (t.size() < 8) fail(Errc::InvalidSpec, "sampled warp needs at least 8 points");
  if (phi.size() != t.size()) fail(Errc::InvalidSpec, "t and phi sizes differ");
  WarpSpec s;
  s.family = Family::Sampled;
  s.n = n;
  s.grid = std::make_shared<CubicSpline>(t, phi);
  s.t_min = t(0);
  s.t_max = t(t.size() - 1);
  const double tol = 1e-12 * std::max(1.0, phi.cwiseAbs().maxCoeff());
  s.pole_min = std::abs(phi(0)) <= tol;
  s.pole_max = std::abs(phi(phi.size() - 1)) <= tol;
  return s;
}

WarpSpec read_sampled_csv(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidSpec, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail(Errc::InvalidSpec, "empty file " + path);
  line.erase(std::remove_if(line.begin(), line.end(), ::isspace), line.end());
  if (line != "t,phi") fail(Errc::InvalidSpec, "expected header t,phi in " + path);
  std::vector<double> ts, ps;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double t = 0, p = 0;
    if (!(ls >> t >> p)) fail(Errc::InvalidSpec, "bad row in " + path + ": " + line);
    ts.push_back(t);
    ps.push_back(p);
  }
  return sampled_spec(Eigen::Map<Eigen::VectorXd>(ts.data(), ts.size()),
                      Eigen::Map<Eigen::VectorXd>(ps.data(), ps.size()), n);
}

WarpSpec scaled(WarpSpec s, double lambda) {
  if (!(lambda > 0)) fail(Errc::InvalidInput, "scale factor must be positive");
  s.t_min *= lambda;
  s.t_max *= lambda;
  s.scale *= lambda;
  return s;
}

namespace {

void validate(const WarpSpec& s) {
  if (s.n < 3) fail(Errc::InvalidSpec, "dimension must be >= 3");
  if (!(s.scale > 0)) fail(Errc::InvalidSpec, "scale must be positive");
  if (!(s.t_min < s.t_max)) fail(Errc::InvalidSpec, "empty domain");
  if (!std::isfinite(s.t_min)) fail(Errc::InvalidSpec, "t_min must be finite");
  switch (s.family) {
    case Family::Cylinder:
      if (!(s.c > 0)) fail(Errc::InvalidSpec, "cylinder radius must be positive");
      break;
    case Family::Sphere:
      if (!(s.a > 0)) fail(Errc::InvalidSpec, "sphere radius must be positive");
      break;
    case Family::Flare:
      if (!(s.sigma > 0 && s.sigma < 1)) fail(Errc::InvalidSpec, "flare needs 0 < sigma < 1");
      break;
    case Family::Dumbbell:
      if (!(s.A > 0 && s.A < 1)) fail(Errc::InvalidSpec, "dumbbell needs 0 < A < 1");
      break;
    case Family::Sampled:
      if (!s.grid || s.grid->size() < 8) fail(Errc::InvalidSpec, "sampled grid too small");
      break;
    case Family::Flat: break;
  }
}

}  // namespace

WarpedMetric::WarpedMetric(WarpSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  const double lo = spec_.t_min;
  const double hi = std::isfinite(spec_.t_max) ? spec_.t_max : lo + 1e3 * spec_.scale;
  constexpr int probes = 2000;
  for (int i = 1; i < probes; ++i) {
    const double t = lo + (hi - lo) * i / probes;
    if (!(phi(t) > 0)) fail(Errc::InvalidSpec, "phi must be positive in the interior");
  }
  const double ptol = spec_.family == Family::Sampled ? 1e-3 : 1e-9;
  auto check_pole = [&](double t, bool flag, const char* which) {
    if (!flag) {
      if (std::isfinite(t) && !(phi(t) > 0))
        fail(Errc::InvalidSpec, std::string("phi vanishes at ") + which + " without pole flag");
      return;
    }
    if (std::abs(phi(t)) > 1e-9 * spec_.scale)
      fail(Errc::InvalidSpec, std::string("pole at ") + which + " needs phi = 0");
    if (std::abs(std::abs(dphi(t)) - 1) > ptol)
      fail(Errc::InvalidSpec, std::string("pole at ") + which + " needs |phi'| = 1");
  };
  check_pole(spec_.t_min, spec_.pole_min, "t_min");
  if (std::isfinite(spec_.t_max)) check_pole(spec_.t_max, spec_.pole_max, "t_max");
  else if (spec_.pole_max) fail(Errc::InvalidSpec, "pole at infinity");
}

bool WarpedMetric::noncompact() const {
  if (spec_.pole_max) return false;
  return !std::isfinite(spec_.t_max) || spec_.truncated;
}

WarpedMetric make_metric(const WarpSpec& spec) { return WarpedMetric(spec); }

namespace {

double pole_band(const WarpedMetric& m) { return 1e-3 * m.spec().scale; }

// Curvatures at distance h from a smooth pole located at t0, from the Taylor
// series so the 0/0 cancellations are done symbolically.
void pole_series(const WarpedMetric& m, double t0, double h, double& krad, double& ksph) {
  constexpr int N = 10;
  const Jet<double, N> J = m.eval<N>(t0);
  const auto& c = J.c;
  auto poly = [h](const std::vector<double>& a) {
    double v = 0;
    for (int k = static_cast<int>(a.size()) - 1; k >= 0; --k) v = v * h + a[k];
    return v;
  };
  std::vector<double> g(N);  // phi / h
  for (int k = 1; k <= N; ++k) g[k - 1] = c[k];
  std::vector<double> d(N);  // phi'
  for (int k = 0; k < N; ++k) d[k] = (k + 1) * c[k + 1];
  std::vector<double> sq(N, 0.0);  // phi'^2
  for (int i = 0; i < N; ++i)
    for (int j = 0; i + j < N; ++j) sq[i + j] += d[i] * d[j];
  std::vector<double> num(N - 2);  // (1 - phi'^2) / h^2
  for (int k = 2; k < N; ++k) num[k - 2] = -sq[k];
  std::vector<double> dd(N - 2);  // (phi'' - phi''(t0)) / h
  for (int k = 3; k <= N; ++k) dd[k - 3] = k * (k - 1) * c[k];
  dd.resize(N - 2);
  const double gv = poly(g);
  ksph = poly(num) / (gv * gv);
  krad = -poly(dd) / gv;
}

// The series needs an odd warp at the pole; a conical tip (phi'' != 0 there,
// as for the flare) has curvature blowing up like 1/t and is evaluated directly.
bool smooth_pole(const WarpedMetric& m, double t0) {
  return std::abs(m.d2phi(t0)) * m.spec().scale <= 1e-6;
}

}  // namespace

CurvatureSample curvature_at(const WarpedMetric& m, double t) {
  const double slack = 1e-12 * m.spec().scale;
  if (!(t >= m.t_min() - slack && t <= m.t_max() + slack))
    fail(Errc::OutOfDomain, "t = " + std::to_string(t) + " outside the domain");
  t = std::clamp(t, m.t_min(), m.t_max());
  CurvatureSample cs;
  cs.t = t;
  const double band = pole_band(m);
  if (m.spec().pole_min && t - m.t_min() < band && smooth_pole(m, m.t_min())) {
    pole_series(m, m.t_min(), t - m.t_min(), cs.K_rad, cs.K_sph);
  } else if (m.spec().pole_max && m.t_max() - t < band && smooth_pole(m, m.t_max())) {
    pole_series(m, m.t_max(), t - m.t_max(), cs.K_rad, cs.K_sph);
  } else {
    const auto J = m.eval<2>(t);
    const double p = J.c[0], dp = J.c[1], ddp = 2 * J.c[2];
    cs.K_rad = -ddp / p;
    cs.K_sph = (1 - dp * dp) / (p * p);
  }
  const int n = m.n();
  cs.ricci.resize(n);
  cs.ricci(0) = (n - 1) * cs.K_rad;
  for (int i = 1; i < n; ++i) cs.ricci(i) = cs.K_rad + (n - 2) * cs.K_sph;
  cs.R = (n - 1) * (2 * cs.K_rad + (n - 2) * cs.K_sph);
  return cs;
}

Point make_point(const WarpedMetric& m, double t, const Eigen::VectorXd& theta) {
  if (theta.size() != m.n()) fail(Errc::InvalidInput, "theta must have n components");
  const double nrm = theta.norm();
  if (!(nrm > 0)) fail(Errc::InvalidInput, "theta must be nonzero");
  return Point{t, theta / nrm};
}

Point meridian_point(const WarpedMetric& m, double t, double angle) {
  Eigen::VectorXd th = Eigen::VectorXd::Zero(m.n());
  th(0) = std::cos(angle);
  th(1) = std::sin(angle);
  return Point{t, th};
}

double sphere_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

namespace {

using Vec3 = Eigen::Matrix<double, 3, 1>;

bool near_pole_min(const WarpedMetric& m, double t) {
  return m.spec().pole_min && t - m.t_min() < 1e-9 * m.spec().scale;
}
bool near_pole_max(const WarpedMetric& m, double t) {
  return m.spec().pole_max && m.t_max() - t < 1e-9 * m.spec().scale;
}

}  // namespace

MeridianTrace trace_meridian(const WarpedMetric& m, double t0, double psi0, double s_max,
                             const MeridianEvents& ev) {
  DormandPrince<3> dp;
  dp.rtol = ev.rtol;
  dp.atol = 1e-2 * ev.rtol * std::max(1.0, m.spec().scale);
  dp.rhs = [&m](double, const Vec3& y) {
    const auto J = m.eval<1>(y(0));
    const double ph = J.c[0], dph = J.c[1];
    const double sp = std::sin(y(2));
    return Vec3(std::cos(y(2)), sp / ph, -dph * sp / ph);
  };
  const double scale = m.spec().scale;
  const double stop_band = 1e-7 * scale;
  MeridianTrace tr;
  Vec3 y(t0, 0.0, psi0);
  double s = 0;
  const double h0c = m.phi(t0) * std::sin(psi0);
  const double h0abs = std::max(std::abs(h0c), 1e-300);
  double h = 1e-2 * std::max(1e-3 * scale, std::min(scale, m.phi(t0)));
  auto event_value = [&](const Vec3& v, int which) {
    return which == 0 ? v(1) - ev.alpha_target : v(0) - ev.t_target;
  };
  const double t_sign0 = std::isfinite(ev.t_target) ? (t0 - ev.t_target) : 0.0;
  while (s < s_max) {
    const Vec3 y_prev = y;
    const double s_prev = s;
    if (!dp.step(s, y, h, s_max - s)) {
      tr.status = MeridianTrace::Status::StepFailure;
      break;
    }
    if (!y.allFinite()) {
      y = y_prev;
      s = s_prev;
      tr.status = MeridianTrace::Status::StepFailure;
      break;
    }
    // Event location by regula falsi on the step size from the previous state.
    int fired = -1;
    if (std::isfinite(ev.alpha_target) && event_value(y, 0) >= 0) fired = 0;
    if (fired < 0 && std::isfinite(ev.t_target)) {
      const double now = y(0) - ev.t_target;
      if ((t_sign0 < 0 && now >= 0) || (t_sign0 > 0 && now <= 0)) fired = 1;
    }
    if (fired >= 0) {
      const double hstep = s - s_prev;
      double lo = 0, hi = hstep;
      double glo = event_value(y_prev, fired), ghi = event_value(y, fired);
      double err = 0;
      Vec3 ymid = y;
      double smid = s;
      int side = 0;
      for (int it = 0; it < 80 && hi - lo > 1e-15 * std::max(1.0, s); ++it) {
        double x = (glo * hi - ghi * lo) / (glo - ghi);
        if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
        ymid = x > 0 ? dp.trial(s_prev, y_prev, x, err) : y_prev;
        smid = s_prev + x;
        const double gm = event_value(ymid, fired);
        if (gm == 0) break;
        if ((gm < 0) == (glo < 0)) {
          lo = x;
          glo = gm;
          if (side == -1) ghi *= 0.5;
          side = -1;
        } else {
          hi = x;
          ghi = gm;
          if (side == 1) glo *= 0.5;
          side = 1;
        }
        if (std::abs(gm) < 1e-14 * std::max(1.0, std::abs(fired == 0 ? ev.alpha_target
                                                                       : ev.t_target)))
          break;
      }
      y = ymid;
      s = smid;
      tr.status = MeridianTrace::Status::Event;
      break;
    }
    const double hc = m.phi(y(0)) * std::sin(y(2));
    tr.max_clairaut_drift = std::max(tr.max_clairaut_drift, std::abs(hc - h0c) / h0abs);
    if (m.spec().pole_min && y(0) - m.t_min() < stop_band) {
      tr.status = MeridianTrace::Status::NearPole;
      break;
    }
    if (m.spec().pole_max && m.t_max() - y(0) < stop_band) {
      tr.status = MeridianTrace::Status::NearPole;
      break;
    }
    if (y(0) < m.t_min()) {
      tr.status = MeridianTrace::Status::ExitLow;
      break;
    }
    if (y(0) > m.t_max()) {
      tr.status = MeridianTrace::Status::ExitHigh;
      break;
    }
  }
  tr.s = s;
  tr.t = y(0);
  tr.alpha = y(1);
  tr.psi = y(2);
  return tr;
}

std::pair<double, double> distance_bounds(const WarpedMetric& m, double t1, double t2,
                                          double delta) {
  const double lower = std::abs(t1 - t2);
  double upper = kInf;
  if (m.spec().pole_min) upper = std::min(upper, (t1 - m.t_min()) + (t2 - m.t_min()));
  if (m.spec().pole_max) upper = std::min(upper, (m.t_max() - t1) + (m.t_max() - t2));
  const double a = std::min(t1, t2), b = std::max(t1, t2);
  constexpr int probes = 8;
  for (int i = 0; i <= probes; ++i) {
    const double ts = a + (b - a) * i / probes;
    upper = std::min(upper, (b - a) + m.phi(ts) * delta);
  }
  return {lower, std::max(lower, upper)};
}

namespace {

bool closed_form(const WarpedMetric& m, double t1, double t2, double delta, DistanceInfo& out) {
  const WarpSpec& s = m.spec();
  switch (s.family) {
    case Family::Flat: {
      const Eigen::Vector2d x(t1, 0.0), y(t2 * std::cos(delta), t2 * std::sin(delta));
      out.length = (x - y).norm();
      const Eigen::Vector2d v = y - x;
      out.psi0 = (t1 > 0 && out.length > 0) ? std::atan2(v(1), v(0)) : 0.0;
      out.closed_form = true;
      return true;
    }
    case Family::Cylinder: {
      const double c = s.c * s.scale;
      out.length = std::hypot(t2 - t1, c * delta);
      out.psi0 = std::atan2(c * delta, t2 - t1);
      out.closed_form = true;
      return true;
    }
    case Family::Sphere: {
      const double a = s.a * s.scale;
      const double u1 = t1 / a, u2 = t2 / a;
      const Eigen::Vector3d x(std::sin(u1), 0.0, std::cos(u1));
      const Eigen::Vector3d y(std::sin(u2) * std::cos(delta), std::sin(u2) * std::sin(delta),
                              std::cos(u2));
      out.length = a * 2.0 * std::atan2((x - y).norm(), (x + y).norm());
      out.psi0 = std::nan("");
      out.closed_form = true;
      return true;
    }
    default: return false;
  }
}

struct Shot {
  bool hit = false;
  double G = 0;  // t_hit - t2, or +-inf when the target angle was not reached
  double length = 0;
};

}  // namespace

DistanceInfo meridian_distance(const WarpedMetric& m, double t1, double t2, double delta,
                               bool allow_closed_form) {
  const double slack = 1e-12 * m.spec().scale;
  if (!(t1 >= m.t_min() - slack && t1 <= m.t_max() + slack && t2 >= m.t_min() - slack &&
        t2 <= m.t_max() + slack))
    fail(Errc::OutOfDomain, "distance endpoint outside the domain");
  t1 = std::clamp(t1, m.t_min(), m.t_max());
  t2 = std::clamp(t2, m.t_min(), m.t_max());
  delta = std::clamp(delta, 0.0, std::numbers::pi);
  DistanceInfo out;
  if (allow_closed_form && closed_form(m, t1, t2, delta, out)) return out;
  // Poles and coincident meridians: the radial segment.
  if (near_pole_min(m, t1) || near_pole_min(m, t2)) {
    out.length = std::abs(t2 - t1);
    out.psi0 = near_pole_min(m, t1) ? 0.0 : std::numbers::pi;
    return out;
  }
  if (near_pole_max(m, t1) || near_pole_max(m, t2)) {
    out.length = std::abs(t2 - t1);
    out.psi0 = near_pole_max(m, t1) ? std::numbers::pi : 0.0;
    return out;
  }
  if (delta < 1e-13) {
    out.length = std::abs(t2 - t1);
    out.psi0 = t2 >= t1 ? 0.0 : std::numbers::pi;
    return out;
  }

  double via_pole = kInf;
  if (m.spec().pole_min) via_pole = std::min(via_pole, (t1 - m.t_min()) + (t2 - m.t_min()));
  if (m.spec().pole_max) via_pole = std::min(via_pole, (m.t_max() - t1) + (m.t_max() - t2));
  const auto [lower, upper] = distance_bounds(m, t1, t2, delta);
  const double s_max = upper * (1 + 1e-6) + 1e-9 * m.spec().scale;
  const double gtol = 1e-10 * (m.spec().scale + std::abs(t2));

  int budget = 200;
  auto shoot = [&](double psi, double rtol) {
    --budget;
    MeridianEvents ev;
    ev.alpha_target = delta;
    ev.rtol = rtol;
    const MeridianTrace tr = trace_meridian(m, t1, psi, s_max, ev);
    Shot sh;
    switch (tr.status) {
      case MeridianTrace::Status::Event:
        sh.hit = true;
        sh.G = tr.t - t2;
        sh.length = tr.s;
        break;
      case MeridianTrace::Status::ExitHigh: sh.G = kInf; break;
      case MeridianTrace::Status::ExitLow:
      case MeridianTrace::Status::NearPole: sh.G = -kInf; break;
      default: sh.G = tr.t >= t2 ? kInf : -kInf; break;
    }
    return sh;
  };

  // Coarse scan over the initial angle; psi = 0 never sweeps any angle and
  // psi = pi runs into the inner end, so they act as virtual bracket ends.
  constexpr int scan = 24;
  constexpr double coarse = 1e-7, fine = 1e-11;
  std::vector<double> psis{0.0};
  std::vector<Shot> shots{Shot{false, kInf, 0}};
  for (int i = 0; i < scan; ++i) {
    psis.push_back(std::numbers::pi * (i + 0.5) / scan);
    shots.push_back(shoot(psis.back(), coarse));
  }
  psis.push_back(std::numbers::pi);
  shots.push_back(Shot{false, -kInf, 0});

  double best = via_pole;
  double best_psi = std::numbers::pi;
  bool best_via_pole = std::isfinite(via_pole);
  auto consider = [&](const Shot& sh, double psi) {
    if (sh.hit && std::abs(sh.G) <= gtol && sh.length < best) {
      best = sh.length;
      best_psi = psi;
      best_via_pole = false;
    }
  };
  for (std::size_t i = 0; i + 1 < psis.size() && budget > 0; ++i) {
    const Shot& a = shots[i];
    const Shot& b = shots[i + 1];
    if ((a.G > 0) == (b.G > 0)) continue;
    // Bisect at coarse accuracy while the bracket is wide, then switch to full
    // accuracy with Illinois-style regula falsi. If the accurate re-shots lose
    // the bracket, redo the whole interval at full accuracy.
    for (int attempt = 0; attempt < 2 && budget > 0; ++attempt) {
      double lo = psis[i], hi = psis[i + 1];
      Shot slo = a, shi = b;
      bool refined = attempt > 0;
      if (refined) {
        if (slo.hit) slo = shoot(lo, fine);
        if (shi.hit) shi = shoot(hi, fine);
        if ((slo.G > 0) == (shi.G > 0)) break;
      }
      bool lost = false, done = false;
      int side = 0;
      while (budget > 0 && hi - lo > 1e-15) {
        if (!refined && hi - lo < 1e-3) {
          refined = true;
          if (slo.hit) slo = shoot(lo, fine);
          if (shi.hit) shi = shoot(hi, fine);
          if ((slo.G > 0) == (shi.G > 0)) {
            lost = true;
            break;
          }
        }
        double mid = 0.5 * (lo + hi);
        if (refined && slo.hit && shi.hit) {
          double gl = slo.G, gh = shi.G;
          if (side <= -2) gh *= std::ldexp(1.0, side + 1);
          if (side >= 2) gl *= std::ldexp(1.0, 1 - side);
          const double sec = lo - gl * (hi - lo) / (gh - gl);
          if (sec > lo && sec < hi) mid = sec;
        }
        const Shot sm = shoot(mid, refined ? fine : coarse);
        if (refined) consider(sm, mid);
        if (refined && sm.hit && std::abs(sm.G) <= gtol) {
          done = true;
          break;
        }
        if ((sm.G > 0) == (slo.G > 0)) {
          lo = mid;
          slo = sm;
          side = side < 0 ? side - 1 : -1;
        } else {
          hi = mid;
          shi = sm;
          side = side > 0 ? side + 1 : 1;
        }
      }
      if (done || !lost) break;
    }
  }
  if (!std::isfinite(best)) {
    fail(Errc::NoConvergence, "shooting did not bracket; bounds [" + std::to_string(lower) +
                                  ", " + std::to_string(upper) + "]");
  }
  out.length = best;
  out.psi0 = best_psi;
  out.via_pole = best_via_pole;
  return out;
}

DistanceInfo distance_info(const WarpedMetric& m, const Point& p, const Point& q,
                           bool allow_closed_form) {
  return meridian_distance(m, p.t, q.t, sphere_angle(p.theta, q.theta), allow_closed_form);
}

double distance(const WarpedMetric& m, const Point& p, const Point& q) {
  return distance_info(m, p, q).length;
}

GeodesicEnd geodesic_shoot(const WarpedMetric& m, const Point& start, const Tangent& dir,
                           double length) {
  if (!(length >= 0)) fail(Errc::InvalidInput, "length must be nonnegative");
  if (!m.contains(start.t)) fail(Errc::OutOfDomain, "start outside the domain");
  const double ph = m.phi(start.t);
  // Remove any radial component of dtheta.
  Eigen::VectorXd w = dir.dtheta - start.theta * start.theta.dot(dir.dtheta);
  const double wn = w.norm();
  const double speed2 = dir.dt * dir.dt + ph * ph * wn * wn;
  if (std::abs(speed2 - 1) > 1e-9) fail(Errc::InvalidInput, "direction must be unit length");
  GeodesicEnd out;
  if (ph * wn < 1e-15) {
    double t = start.t + dir.dt * length;
    Eigen::VectorXd th = start.theta;
    double dt = dir.dt;
    if (t < m.t_min()) {
      if (!m.spec().pole_min) fail(Errc::ExitedDomain, "radial geodesic exits at t_min");
      t = 2 * m.t_min() - t;
      th = -th;
      dt = -dt;
    }
    if (t > m.t_max()) {
      if (!m.spec().pole_max) fail(Errc::ExitedDomain, "radial geodesic exits at t_max");
      t = 2 * m.t_max() - t;
      th = -th;
      dt = -dt;
    }
    out.point = Point{t, th};
    out.tangent = Tangent{dt, Eigen::VectorXd::Zero(m.n())};
    return out;
  }
  const Eigen::VectorXd what = w / wn;
  const double psi0 = std::atan2(ph * wn, dir.dt);
  const MeridianTrace tr = trace_meridian(m, start.t, psi0, length);
  if (tr.status != MeridianTrace::Status::Done) {
    fail(Errc::ExitedDomain, "geodesic left the domain at s = " + std::to_string(tr.s) +
                                 ", t = " + std::to_string(tr.t));
  }
  const double pe = m.phi(tr.t);
  out.point.t = tr.t;
  out.point.theta = std::cos(tr.alpha) * start.theta + std::sin(tr.alpha) * what;
  out.tangent.dt = std::cos(tr.psi);
  out.tangent.dtheta =
      (std::sin(tr.psi) / pe) * (-std::sin(tr.alpha) * start.theta + std::cos(tr.alpha) * what);
  out.clairaut_start = ph * std::sin(psi0);
  out.clairaut_end = pe * std::sin(tr.psi);
  return out;
}

double ball_volume(const WarpedMetric& m, double r) {
  if (!(r >= 0)) fail(Errc::InvalidRange, "radius must be nonnegative");
  double a, b;
  if (m.spec().pole_min) {
    a = m.t_min();
    b = m.t_min() + r;
  } else if (m.spec().pole_max) {
    a = m.t_max() - r;
    b = m.t_max();
  } else {
    fail(Errc::RequiresPole, "pole-centered ball needs a pole");
  }
  if (a < m.t_min() - 1e-12 || b > m.t_max() + 1e-12)
    fail(Errc::InvalidRange, "radius exceeds the pole's reach");
  const int p = m.n() - 1;
  const double omega = sphere_volume(p);
  auto f = [&](double t) { return std::pow(m.phi(t), p); };
  const double rough = (b - a) * (f(a) + 4 * f(0.5 * (a + b)) + f(b)) / 6;
  const double tol = std::max(1e-10 * (b - a), 1e-13 * std::abs(rough));
  return omega * integrate(f, a, b, tol, 30);
}

McEstimate annulus_volume_mc(const WarpedMetric& m, const Point& Q, double R1, double R2,
                             long samples, std::uint64_t seed, int jobs) {
  if (!(R1 < R2)) fail(Errc::InvalidRange, "need R1 < R2");
  if (samples < 1000) fail(Errc::InvalidInput, "need at least 1000 samples");
  const double lo = std::max(m.t_min(), Q.t - R2);
  const double hi = std::min(m.t_max(), Q.t + R2);
  const int strata = static_cast<int>(std::clamp(samples / 200, 16L, 512L));
  const long per = (samples + strata - 1) / strata;
  const double width = (hi - lo) / strata;
  const int p = m.n() - 1;
  const double omega = sphere_volume(p);
  const bool q_at_pole = near_pole_min(m, Q.t) || near_pole_max(m, Q.t);
  std::vector<double> mean(strata), var(strata);
  parallel_batches(strata, resolve_jobs(jobs), [&](int b) {
    Rng rng(batch_seed(seed, static_cast<std::uint64_t>(b)));
    double sum = 0, sum2 = 0;
    Eigen::VectorXd th(m.n());
    for (long i = 0; i < per; ++i) {
      const double t = lo + width * (b + rng.uniform());
      for (int k = 0; k < m.n(); ++k) th(k) = rng.normal();
      th.normalize();
      const double delta = sphere_angle(th, Q.theta);
      bool inside;
      if (q_at_pole) {
        const double d = std::abs(t - Q.t);
        inside = d >= R1 && d <= R2;
      } else {
        const auto [dl, du] = distance_bounds(m, Q.t, t, delta);
        if (dl > R2 || du < R1) {
          inside = false;
        } else if (dl >= R1 && du <= R2) {
          inside = true;
        } else {
          const double d = meridian_distance(m, Q.t, t, delta).length;
          inside = d >= R1 && d <= R2;
        }
      }
      const double f = inside ? omega * std::pow(m.phi(t), p) : 0.0;
      sum += f;
      sum2 += f * f;
    }
    const double mu = sum / per;
    mean[b] = mu;
    var[b] = per > 1 ? std::max(0.0, (sum2 - per * mu * mu) / (per - 1)) : 0.0;
  });
  McEstimate est;
  double v = 0;
  for (int b = 0; b < strata; ++b) {
    est.value += width * mean[b];
    v += width * width * var[b] / per;
  }
  est.stderr_ = std::sqrt(v);
  est.samples = per * strata;
  return est;
}

}  // namespace neckscope
