#include "neckscope/asymptotic_invariants.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "neckscope/constant_chain.hpp"
#include "neckscope/error.hpp"
#include "neckscope/neck_analysis.hpp"
#include "neckscope/numerics.hpp"

namespace neckscope {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

bool at_pole_min(const WarpedMetric& m, double t) {
  return m.spec().pole_min && t - m.t_min() <= 1e-9 * m.spec().scale;
}

bool at_pole_max(const WarpedMetric& m, double t) {
  return m.spec().pole_max && m.t_max() - t <= 1e-9 * m.spec().scale;
}

// Least squares y = A + B x.
std::pair<double, double> linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const int N = static_cast<int>(x.size());
  if (N == 0) return {0, 0};
  if (N == 1) return {y[0], 0};
  Eigen::MatrixXd X(N, 2);
  Eigen::VectorXd Y(N);
  for (int i = 0; i < N; ++i) {
    X(i, 0) = 1;
    X(i, 1) = x[i];
    Y(i) = y[i];
  }
  const Eigen::Vector2d c = X.colPivHouseholderQr().solve(Y);
  return {c(0), c(1)};
}

// Position of the meridian geodesic from (tq, 0) with initial angle psi after
// arclength s. The inward radial geodesic continues through a pole.
struct GeoPos {
  bool ok = false;
  double t = 0, alpha = 0;
  MeridianTrace::Status status = MeridianTrace::Status::Done;
  double s_stop = 0;
};

bool inward_radial(double psi) { return psi > kPi - 1e-12; }

GeoPos geo_point(const WarpedMetric& m, double tq, double psi, double s) {
  GeoPos g;
  if (m.spec().pole_min && tq == m.t_min()) {
    // From the pole every geodesic is radial; psi is then the polar angle.
    g.t = tq + s;
    g.alpha = psi;
    g.ok = g.t <= m.t_max();
    if (!g.ok) g.status = MeridianTrace::Status::ExitHigh;
    g.s_stop = s;
    return g;
  }
  if (inward_radial(psi) && m.spec().pole_min) {
    const double sp = tq - m.t_min();
    if (s <= sp) {
      g.ok = true;
      g.t = tq - s;
      g.alpha = 0;
    } else {
      g.t = m.t_min() + (s - sp);
      g.alpha = kPi;
      g.ok = g.t <= m.t_max();
      if (!g.ok) g.status = MeridianTrace::Status::ExitHigh;
    }
    g.s_stop = s;
    return g;
  }
  if (psi < 1e-12) {
    g.t = tq + s;
    g.ok = g.t <= m.t_max();
    if (!g.ok) g.status = MeridianTrace::Status::ExitHigh;
    g.s_stop = s;
    return g;
  }
  const MeridianTrace tr = trace_meridian(m, tq, psi, s);
  g.status = tr.status;
  g.s_stop = tr.s;
  g.t = tr.t;
  g.alpha = tr.alpha;
  g.ok = tr.status == MeridianTrace::Status::Done;
  return g;
}

// Longest s for which the meridian geodesic from (tq, 0) with angle psi is
// minimal, capped at Lambda.
double cut_length(const WarpedMetric& m, double tq, double psi, double Lambda) {
  const double sc = m.spec().scale;
  double upper = Lambda;
  if (inward_radial(psi) && m.spec().pole_min) {
    upper = std::min(Lambda, (tq - m.t_min()) + (m.t_max() - m.t_min()));
  } else if (psi < 1e-12) {
    upper = std::min(Lambda, m.t_max() - tq);
  } else {
    MeridianEvents ev;
    ev.alpha_target = kPi;
    const MeridianTrace tr = trace_meridian(m, tq, psi, Lambda, ev);
    if (tr.status == MeridianTrace::Status::StepFailure)
      fail(Errc::NoConvergence, "geodesic integration failed");
    if (tr.status != MeridianTrace::Status::Done) upper = tr.s;
  }
  auto minimal = [&](double s) {
    const GeoPos p = geo_point(m, tq, psi, s);
    if (!p.ok) return false;
    const double d = meridian_distance(m, tq, p.t, p.alpha).length;
    return d >= s - 1e-7 * std::max(sc, s);
  };
  if (minimal(upper)) return upper;
  double lo = 0, hi = std::min(sc, upper);
  while (minimal(hi)) {
    lo = hi;
    hi = std::min(2 * hi, upper);
  }
  while (hi - lo > 1e-4 * std::max(sc, lo)) {
    const double mid = 0.5 * (lo + hi);
    if (minimal(mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}

double neville_at_zero(const std::vector<double>& h, std::vector<double> f) {
  const int N = static_cast<int>(h.size());
  for (int k = 1; k < N; ++k)
    for (int i = 0; i + k < N; ++i)
      f[i] = (h[i + k] * f[i] - h[i] * f[i + 1]) / (h[i + k] - h[i]);
  return f[0];
}

double min_ricci(const WarpedMetric& m) {
  const double sc = m.spec().scale;
  double lo = m.t_min(), hi = m.t_max();
  if (!std::isfinite(hi)) hi = lo + 1e4 * sc;
  double mn = kInf;
  const int N = 4000;
  const int first = m.spec().pole_min ? 1 : 0;
  const int last = m.spec().pole_max ? N - 1 : N;
  for (int i = first; i <= last; ++i) {
    const double t = lo + (hi - lo) * i / N;
    mn = std::min(mn, curvature_at(m, t).ricci.minCoeff());
  }
  return mn;
}

}  // namespace

// ---------------------------------------------------------------- ASCR

AscrProfile ascr_profile(const WarpedMetric& m, const std::vector<double>& r_grid,
                         const AscrOptions& opt) {
  if (!m.noncompact()) fail(Errc::RequiresNoncompact, "ASCR needs a noncompact end");
  if (r_grid.empty()) fail(Errc::InvalidInput, "empty r-grid");
  for (size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] >= 0)) fail(Errc::InvalidRange, "r-grid must be nonnegative");
    if (i > 0 && !(r_grid[i] > r_grid[i - 1])) fail(Errc::InvalidRange, "r-grid must increase");
  }
  const double sc = m.spec().scale;
  const double reach = m.t_max() - m.t_min();
  double cap = opt.d_cap > 0 ? opt.d_cap : std::max(1e3 * r_grid.back(), 1e4 * sc);
  cap = std::min(cap, reach);
  if (!(cap > r_grid.back())) fail(Errc::InvalidRange, "r-grid reaches past the sampled end");

  AscrProfile p;
  p.d_cap = cap;
  const double d_lo = std::max(r_grid.front(), 1e-3 * sc);
  std::vector<double> d;
  const int per = std::max(4, opt.samples_per_decade);
  const int steps = static_cast<int>(std::ceil(per * std::log10(cap / d_lo)));
  for (int i = 0; i <= steps; ++i) d.push_back(d_lo * std::pow(cap / d_lo, double(i) / steps));
  for (double r : r_grid)
    if (r > 0) d.push_back(r);
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());

  const int N = static_cast<int>(d.size());
  std::vector<double> R(N), Rd2(N);
  for (int i = 0; i < N; ++i) {
    R[i] = curvature_at(m, m.t_min() + d[i]).R;
    Rd2[i] = R[i] * d[i] * d[i];
  }
  // Suffix suprema.
  std::vector<double> supRd2(N + 1, -kInf), supR(N + 1, -kInf);
  for (int i = N - 1; i >= 0; --i) {
    supRd2[i] = std::max(supRd2[i + 1], Rd2[i]);
    supR[i] = std::max(supR[i + 1], R[i]);
  }

  std::vector<double> fx, fy;
  for (int i = 0; i < N; ++i) {
    if (d[i] >= cap / 10) {
      fx.push_back(1 / d[i]);
      fy.push_back(Rd2[i]);
      p.last_decade_sup = std::max(p.last_decade_sup, Rd2[i]);
    }
    if (d[i] >= d_lo && d[i] <= 10 * std::max(d_lo, sc))
      p.first_decade_sup = std::max(p.first_decade_sup, Rd2[i]);
  }
  p.tail_limit = linear_fit(fx, fy).first;
  p.diverging = p.last_decade_sup > opt.divergence_ratio * p.first_decade_sup &&
                p.last_decade_sup > 0;

  for (double r : r_grid) {
    const int i = static_cast<int>(std::lower_bound(d.begin(), d.end(), std::max(r, d_lo)) -
                                   d.begin());
    double a2 = std::max({supRd2[i], p.tail_limit, 0.0});
    const double kap = std::max(supR[i], 0.0);
    if (p.diverging) a2 = kInf;
    p.r.push_back(r);
    p.a2.push_back(a2);
    p.kappa.push_back(kap);
    p.rho.push_back(a2 > 0 ? kPi * r / (4 * std::sqrt(a2)) : kInf);
  }

  if (p.diverging) {
    p.ascr_estimate = kInf;
    p.fit_A = kInf;
  } else {
    std::vector<double> gx, gy;
    for (size_t i = 0; i < p.r.size(); ++i)
      if (p.r[i] >= p.r.back() / 10 && p.r[i] > 0) {
        gx.push_back(1 / p.r[i]);
        gy.push_back(p.a2[i]);
      }
    std::tie(p.fit_A, p.fit_B) = linear_fit(gx, gy);
    p.ascr_estimate = std::max(p.fit_A, 0.0);
  }
  return p;
}

std::string ascr_csv(const AscrProfile& p) {
  std::ostringstream o;
  o << "r,a2,kappa,rho\n";
  for (size_t i = 0; i < p.r.size(); ++i)
    o << fmt(p.r[i]) << ',' << fmt(p.a2[i]) << ',' << fmt(p.kappa[i]) << ',' << fmt(p.rho[i])
      << '\n';
  return o.str();
}

// ---------------------------------------------------------------- AVR

AvrResult avr(const WarpedMetric& m) {
  const double sc = m.spec().scale;
  const int n = m.n();
  AvrResult res;
  res.upper_bound_only = !m.spec().pole_min;
  if (!m.spec().pole_min && !std::isfinite(m.t_min()))
    fail(Errc::RequiresPole, "AVR needs a pole or a finite end");
  const double reach = m.t_max() - m.t_min();
  const double r_max = std::min(reach, 1e4 * sc);
  if (!(r_max >= 1e3 * sc)) fail(Errc::InvalidRange, "domain reach below 1e3 times the scale");
  const int p = n - 1;
  const double omega = sphere_volume(p);
  std::vector<double> h, f;
  for (int k = 0; k <= 5; ++k) {
    const double r = r_max / std::ldexp(1.0, k);
    double V;
    if (m.spec().pole_min) {
      V = ball_volume(m, r);
    } else {
      auto g = [&](double t) { return std::pow(m.phi(t), p); };
      V = omega * integrate(g, m.t_min(), m.t_min() + r, 1e-10 * r, 30);
    }
    res.radii.push_back(r);
    res.ratios.push_back(V / std::pow(r, n));
    h.push_back(1 / r);
    f.push_back(V / std::pow(r, n));
  }
  res.value = std::max(0.0, neville_at_zero(h, f));
  return res;
}

// ---------------------------------------------------------------- theta(r)

ThetaProfile theta_profile(const WarpedMetric& m, const Point& Q, const std::vector<double>& r,
                           const ThetaOptions& opt) {
  if (!m.contains(Q.t)) fail(Errc::OutOfDomain, "Q outside the domain");
  if (opt.ray_samples < 32) fail(Errc::InvalidInput, "need at least 32 ray samples");
  if (opt.segment_samples < 1 || opt.ray_samples % opt.segment_samples != 0)
    fail(Errc::InvalidInput, "ray_samples must be a multiple of segment_samples");
  ThetaProfile P;
  P.Q = Q;
  P.r = r;
  if (at_pole_min(m, Q.t) || at_pole_max(m, Q.t)) {
    P.q_at_pole = true;
    P.theta.assign(r.size(), 0.0);
    P.theta_err.assign(r.size(), 0.0);
    return P;
  }
  const double Lambda = opt.ray_length * m.spec().scale;
  const int jobs = resolve_jobs(opt.jobs);
  // Cut lengths keyed by psi; NaN marks a failed direction.
  std::map<double, double> cut;
  auto fill = [&](int N) {
    std::vector<double> todo;
    for (int i = 0; i <= N; ++i) {
      const double psi = kPi * (double(i) / N);
      if (!cut.count(psi)) todo.push_back(psi);
    }
    std::vector<double> out(todo.size());
    parallel_batches(static_cast<int>(todo.size()), jobs, [&](int b) {
      try {
        out[b] = cut_length(m, Q.t, todo[b], Lambda);
      } catch (const Error&) {
        out[b] = std::nan("");
      }
    });
    for (size_t i = 0; i < todo.size(); ++i) cut[todo[i]] = out[i];
  };
  struct Level {
    std::vector<double> theta, ray, seg, seg_cut;
    int excluded = 0, directions = 0;
  };
  auto level = [&](int Ns, int Nr) {
    fill(Nr);
    Level L;
    for (int i = 0; i <= Nr; ++i) {
      const double psi = kPi * (double(i) / Nr);
      const double c = cut[psi];
      ++L.directions;
      if (std::isnan(c)) {
        ++L.excluded;
        continue;
      }
      if (c >= Lambda * (1 - 1e-12)) L.ray.push_back(psi);
    }
    for (int j = 0; j <= Ns; ++j) {
      const double psi = kPi * (double(j) / Ns);
      const double c = cut[psi];
      if (std::isnan(c)) continue;
      L.seg.push_back(psi);
      L.seg_cut.push_back(c);
    }
    for (double rr : r) {
      double th = 0;
      bool any = false;
      for (size_t j = 0; j < L.seg.size(); ++j) {
        if (L.seg_cut[j] < rr) continue;
        any = true;
        double best = kPi;
        for (double q : L.ray) best = std::min(best, std::abs(L.seg[j] - q));
        th = std::max(th, best);
      }
      L.theta.push_back(any ? th : 0.0);
    }
    return L;
  };
  int Ns = opt.segment_samples, Nr = opt.ray_samples;
  Level cur = level(Ns, Nr);
  std::vector<double> err(r.size(), 0.0);
  for (int dbl = 0; dbl < opt.max_doublings; ++dbl) {
    Ns *= 2;
    Nr *= 2;
    Level nxt = level(Ns, Nr);
    double mx = 0, change = 0;
    for (size_t i = 0; i < r.size(); ++i) {
      err[i] = std::abs(nxt.theta[i] - cur.theta[i]);
      change = std::max(change, err[i]);
      mx = std::max(mx, nxt.theta[i]);
    }
    cur = std::move(nxt);
    if (change <= opt.tolerance * mx + 1e-3) break;
  }
  P.theta = cur.theta;
  P.theta_err = err;
  P.ray_psi = cur.ray;
  P.segment_psi = cur.seg;
  P.segment_cut = cur.seg_cut;
  P.excluded = cur.excluded;
  P.directions = cur.directions;
  return P;
}

std::string theta_csv(const ThetaProfile& p) {
  std::ostringstream o;
  o << "r,theta\n";
  for (size_t i = 0; i < p.r.size(); ++i) o << fmt(p.r[i]) << ',' << fmt(p.theta[i]) << '\n';
  return o.str();
}

double theta_at(const ThetaProfile& p, double d) {
  if (p.q_at_pole) return 0;
  double th = kPi;
  for (size_t i = 0; i < p.r.size(); ++i)
    if (p.r[i] <= d) th = p.theta[i];
  return th;
}

BusemannBounds busemann_estimate(const WarpedMetric& m, const ThetaProfile& profile,
                                 const Point& x, const ThetaOptions& opt) {
  const Point& Q = profile.Q;
  const double delta = sphere_angle(Q.theta, x.theta);
  const DistanceInfo di = meridian_distance(m, Q.t, x.t, delta);
  BusemannBounds b;
  b.upper = di.length;
  if (profile.q_at_pole) {
    b.lower = b.ray_lower = b.theta_lower = b.upper;
    return b;
  }
  b.theta_lower = (1 - theta_at(profile, b.upper)) * b.upper;
  b.ray_lower = -kInf;
  const double Lambda = opt.ray_length * m.spec().scale;
  // Rays closest in initial angle to the segment towards x.
  std::vector<std::pair<double, double>> near;
  for (double q : profile.ray_psi) near.push_back({std::abs(q - di.psi0), q});
  std::sort(near.begin(), near.end());
  const size_t use = std::min<size_t>(4, near.size());
  for (size_t k = 0; k < use; ++k) {
    const GeoPos e = geo_point(m, Q.t, near[k].second, Lambda);
    if (!e.ok) continue;
    const double d2 = meridian_distance(m, e.t, x.t, std::abs(e.alpha - delta)).length;
    b.ray_lower = std::max(b.ray_lower, Lambda - d2);
  }
  b.lower = std::min(std::max(b.ray_lower, b.theta_lower), b.upper);
  return b;
}

BusemannReport busemann_report(const WarpedMetric& m, const Point& Q, const std::vector<double>& r,
                               const std::vector<Point>& xs, double eta2,
                               const ThetaOptions& opt) {
  BusemannReport rep;
  rep.Q = Q;
  rep.eta2 = eta2;
  rep.theta = theta_profile(m, Q, r, opt);
  rep.points = xs;
  for (const Point& x : xs) rep.bounds.push_back(busemann_estimate(m, rep.theta, x, opt));
  return rep;
}

// ---------------------------------------------------------------- containment

ContainmentReport busemann_containment_check(const WarpedMetric& m, const Point& Q, double r,
                                             double rho, double eta2, Perturbation kind,
                                             double amplitude, int directions) {
  if (!(eta2 > 0)) fail(Errc::InvalidInput, "eta2 must be positive");
  if (amplitude < 0) amplitude = 0.99 * eta2;
  if (!(amplitude < eta2)) fail(Errc::InvalidInput, "perturbation must be smaller than eta2");
  if (!(r > eta2 && rho > 0)) fail(Errc::InvalidRange, "need r > eta2 and rho > 0");
  if (directions < 4) fail(Errc::InvalidInput, "need at least 4 directions");
  const double sc = m.spec().scale;
  const bool exact = m.spec().family == Family::Flat || at_pole_min(m, Q.t) || at_pole_max(m, Q.t);
  ThetaProfile prof;
  ThetaOptions topt;
  if (!exact) prof = theta_profile(m, Q, {r}, topt);

  auto dist_Q = [&](double t, double alpha) { return meridian_distance(m, Q.t, t, alpha).length; };
  auto bus = [&](double t, double alpha) {
    if (exact) return dist_Q(t, alpha);
    return busemann_estimate(m, prof, meridian_point(m, t, alpha), topt).lower;
  };
  auto pert = [&](double t, double alpha) {
    switch (kind) {
      case Perturbation::Zero: return 0.0;
      case Perturbation::PlusConstant: return amplitude;
      case Perturbation::MinusConstant: return -amplitude;
      case Perturbation::Oscillating: return amplitude * std::sin(3 * alpha + 1.7 * t / sc);
    }
    return 0.0;
  };
  auto bhat = [&](double t, double alpha) { return bus(t, alpha) + pert(t, alpha); };

  struct Level {
    double psi, s, t, alpha;
  };
  std::vector<Level> lv;
  for (int i = 0; i < directions; ++i) {
    const double psi = kPi * (i + 0.5) / directions;
    auto f = [&](double s, GeoPos& g) {
      g = geo_point(m, Q.t, psi, s);
      if (!g.ok) return kInf;
      return bhat(g.t, g.alpha) - r;
    };
    GeoPos g;
    double hi = r;
    int tries = 0;
    while (f(hi, g) <= 0 && tries++ < 20) hi *= 1.5;
    if (!g.ok || tries > 20) continue;
    double lo = 0;
    for (int it = 0; it < 50 && hi - lo > 1e-10 * std::max(sc, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (f(mid, g) <= 0) lo = mid;
      else hi = mid;
    }
    f(hi, g);
    if (g.ok) lv.push_back({psi, hi, g.t, g.alpha});
  }
  if (lv.size() < 2) fail(Errc::NoConvergence, "level set sampling failed");
  double gap = 0;
  for (size_t i = 0; i + 1 < lv.size(); ++i)
    gap = std::max(gap, meridian_distance(m, lv[i].t, lv[i + 1].t,
                                          std::abs(lv[i].alpha - lv[i + 1].alpha))
                            .length);
  auto cloud_dist = [&](double t, double alpha) {
    double best = kInf;
    for (const Level& y : lv) {
      const double da = std::abs(alpha - y.alpha);
      if (distance_bounds(m, t, y.t, da).first >= best) continue;
      best = std::min(best, meridian_distance(m, t, y.t, da).length);
    }
    return best;
  };

  ContainmentReport rep;
  auto note = [](ContainmentClause& c, double slack) {
    if (c.checked == 0 || slack < c.worst_margin) c.worst_margin = slack;
    ++c.checked;
    if (!(slack > 0)) c.pass = false;
  };
  double eta = 0;
  for (const Level& y : lv) {
    const double dQ = dist_Q(y.t, y.alpha);
    eta = std::max(eta, dQ);
    note(rep.clause[0], eta2 - std::abs(bus(y.t, y.alpha) - r));
    note(rep.clause[0], dQ - (r - eta2));
  }
  rep.eta = eta * (1 + 1e-12);
  for (const Level& y : lv) {
    for (int k = 1; k <= 12; ++k) {
      const GeoPos g = geo_point(m, Q.t, y.psi, y.s * 1.5 * k / 12);
      if (!g.ok) continue;
      const double dQ = dist_Q(g.t, g.alpha);
      const double b = bus(g.t, g.alpha);
      const double bh = b + pert(g.t, g.alpha);
      if (dQ < r - eta2) note(rep.clause[1], (r - eta2) - b);
      if (b < r - eta2) note(rep.clause[1], r - bh);
      if (bh < r) note(rep.clause[1], (r + eta2) - b);
    }
  }
  for (const Level& y : lv) {
    auto D = [&](double s, GeoPos& g) {
      g = geo_point(m, Q.t, y.psi, s);
      if (!g.ok) return -kInf;
      return cloud_dist(g.t, g.alpha) - rho;
    };
    GeoPos g;
    double lo = y.s, hi = y.s + rho;
    int tries = 0;
    while (D(hi, g) < 0 && tries++ < 20) hi += rho;
    if (!g.ok || tries > 20) continue;
    for (int it = 0; it < 50 && hi - lo > 1e-9 * std::max(sc, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (D(mid, g) < 0) lo = mid;
      else hi = mid;
    }
    D(hi, g);
    if (!g.ok) continue;
    const double dQ = dist_Q(g.t, g.alpha);
    note(rep.clause[2], dQ - (r + rho - eta2) + gap);
    note(rep.clause[3], rep.eta + rho + gap - dQ);
  }
  return rep;
}

// ---------------------------------------------------------------- volume comparison

BishopGromovReport bishop_gromov_check(const WarpedMetric& m, const Point& Q,
                                       const std::vector<double>& radii, long samples,
                                       std::uint64_t seed, int jobs) {
  if (radii.size() < 3) fail(Errc::InvalidInput, "need at least three radii");
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] >= 0)) fail(Errc::InvalidRange, "radii must be nonnegative");
    if (i > 0 && !(radii[i] > radii[i - 1])) fail(Errc::InvalidRange, "radii must increase");
  }
  const double ric = min_ricci(m);
  if (ric < -1e-9) {
    char b[96];
    std::snprintf(b, sizeof b, "Ricci curvature reaches %.6g < 0", ric);
    fail(Errc::HypothesisFail, b);
  }
  BishopGromovReport rep;
  rep.radii = radii;
  rep.exact = at_pole_min(m, Q.t);
  const int n = m.n();
  const double omega = sphere_volume(n - 1);
  for (size_t i = 0; i + 1 < radii.size(); ++i) {
    const double R1 = radii[i], R2 = radii[i + 1];
    double V, E;
    if (rep.exact) {
      V = ball_volume(m, R2) - ball_volume(m, R1);
      E = 0;
    } else {
      const McEstimate mc = annulus_volume_mc(m, Q, R1, R2, samples,
                                              batch_seed(seed, static_cast<std::uint64_t>(i)), jobs);
      V = mc.value;
      E = mc.stderr_;
    }
    const double euc = omega / n * (std::pow(R2, n) - std::pow(R1, n));
    rep.volume.push_back(V);
    rep.volume_err.push_back(E);
    rep.euclid.push_back(euc);
    rep.ratio.push_back(V / euc);
    rep.ratio_err.push_back(E / euc);
  }
  rep.worst_excess = -kInf;
  for (size_t i = 0; i + 1 < rep.ratio.size(); ++i) {
    const double diff = rep.ratio[i + 1] - rep.ratio[i];
    double excess;
    if (rep.exact) {
      excess = diff / (1e-10 * std::max(rep.ratio[i], 1e-300));
    } else {
      const double s = 3 * std::hypot(rep.ratio_err[i], rep.ratio_err[i + 1]);
      excess = s > 0 ? diff / s : (diff > 0 ? kInf : -kInf);
    }
    rep.worst_excess = std::max(rep.worst_excess, excess);
    if (excess > 1) rep.pass = false;
  }
  return rep;
}

Point neck_base_point(const WarpedMetric& m, double t0, double t1, double L_b) {
  const NeckWindow w(m, t0, t1);
  if (!(L_b > 0 && L_b <= w.half_length() * (1 + 1e-12)))
    fail(Errc::PreconditionNeck, "window half-length below L_b");
  const double zc = 0.5 * (w.a() + w.b());
  return meridian_point(m, w.t_of_z(std::max(w.a(), zc - L_b)), 0.0);
}

RelVolReport relative_volume_report(const WarpedMetric& m, double t0, double t1,
                                    const Point& Q, double R1, double R2, double L_b,
                                    const RelVolOptions& opt) {
  const int n = m.n();
  const double sc = m.spec().scale;
  RelVolReport rep;
  rep.Q = Q;
  rep.L_b = L_b;
  rep.delta = delta_of_Lb(n, L_b);
  rep.eps_b = epsilon_prime(0.1, 1, L_b, n);
  const NeckRequirement req{std::min(opt.eps_a, rep.eps_b), opt.k_a, L_b};
  NeckCertificate cert;
  try {
    cert = certify_neck(m, t0, t1, req);
  } catch (const Error& e) {
    fail(Errc::PreconditionNeck, std::string("no neck on the window: ") + e.what());
  }
  rep.neck_eps = cert.eps;
  if (!cert.pass) {
    char b[160];
    std::snprintf(b, sizeof b, "window certifies eps = %.4g with L = %.4g, need eps <= %.4g, L >= %.4g",
                  cert.eps, cert.L, req.eps, req.L);
    fail(Errc::PreconditionNeck, b);
  }
  const NeckWindow w(m, t0, t1);
  const double zc = 0.5 * (w.a() + w.b());
  const double t_c = w.t_of_z(zc);
  const double r_c = m.phi(t_c);
  if (std::abs(r_c - 1) > 0.05)
    fail(Errc::PreconditionNeck, "center sphere radius must be 1, got " + fmt(r_c));
  const double t_q = w.t_of_z(zc - L_b);
  if (std::abs(Q.t - t_q) > 1e-6 * std::max(sc, std::abs(t_q)))
    fail(Errc::PreconditionNeck, "Q must lie on the slice z = -L_b");
  const double t_far = w.t_of_z(zc + L_b);

  // Constructive r0: cover the cap and the neck by upper bounds, plus the margin.
  double cover = 0;
  const int NT = 64, NA = 32;
  for (int i = 0; i <= NT; ++i) {
    const double t = m.t_min() + (t_far - m.t_min()) * i / NT;
    for (int j = 0; j <= NA; ++j)
      cover = std::max(cover, distance_bounds(m, Q.t, t, kPi * j / NA).second);
  }
  rep.r0 = cover + opt.r0_margin * sc;
  rep.R1 = R1 > 0 ? R1 : rep.r0;
  rep.R2 = R2 > 0 ? R2 : 2 * rep.R1;
  if (rep.R1 < rep.r0) fail(Errc::InvalidRange, "R1 below r0 = " + fmt(rep.r0));
  if (!(rep.R2 > rep.R1)) fail(Errc::InvalidRange, "need R2 > R1");

  const McEstimate mc = annulus_volume_mc(m, Q, rep.R1, rep.R2, opt.samples, opt.seed, opt.jobs);
  const double euc = sphere_volume(n - 1) / n * (std::pow(rep.R2, n) - std::pow(rep.R1, n));
  rep.ratio = mc.value / euc;
  rep.ratio_err = mc.stderr_ / euc;

  // w0 and the sublemma band along sampled minimal geodesics.
  const double tol = 1e-7 * std::max(sc, rep.R1);
  auto minimal_at = [&](double psi, double s, GeoPos& g) {
    g = geo_point(m, Q.t, psi, s);
    if (!g.ok) return false;
    return meridian_distance(m, Q.t, g.t, g.alpha).length >= s - tol;
  };
  rep.w0 = kInf;
  std::vector<double> gamma;
  for (int i = 0; i < opt.w0_directions; ++i) {
    const double psi = kPi * i / opt.w0_directions;
    MeridianEvents ev;
    ev.t_target = t_c;
    double s_cross;
    if (psi < 1e-12) {
      s_cross = t_c - Q.t;
    } else {
      const MeridianTrace tr = trace_meridian(m, Q.t, psi, rep.R1, ev);
      if (tr.status != MeridianTrace::Status::Event) continue;
      s_cross = tr.s;
    }
    GeoPos g;
    if (!minimal_at(psi, s_cross, g)) continue;
    gamma.push_back(psi);
    rep.w0 = std::min(rep.w0, s_cross);
  }
  rep.w0_ok = std::isfinite(rep.w0) && rep.w0 >= 0.9 * L_b;
  rep.sublemma_points = 0;
  rep.sublemma_max_distance = 0;
  if (std::isfinite(rep.w0)) {
    for (double psi : gamma) {
      GeoPos g;
      if (!minimal_at(psi, rep.w0 + 2, g)) continue;
      for (int k = 0; k <= 8; ++k) {
        const GeoPos p = geo_point(m, Q.t, psi, rep.w0 - 2 + 0.5 * k);
        if (!p.ok) continue;
        rep.sublemma_max_distance = std::max(rep.sublemma_max_distance, std::abs(p.t - t_c));
        ++rep.sublemma_points;
      }
    }
  }
  rep.sublemma_ok = rep.sublemma_points > 0 && rep.sublemma_max_distance <= 6 * sc;
  rep.pass = rep.ratio <= rep.delta + 3 * rep.ratio_err;
  return rep;
}

}  // namespace neckscope
