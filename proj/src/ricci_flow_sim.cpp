#include "neckscope/ricci_flow_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

#include "neckscope/error.hpp"
#include "neckscope/neck_analysis.hpp"
#include "neckscope/numerics.hpp"

namespace neckscope {

namespace {

using Eigen::VectorXd;

constexpr int kGhost = 2;

// Nodes sit half a cell off a pole, so no node carries the 0/0 quotients.
// Ghosts mirror across a pole (phi odd, psi even) and use degree-5
// extrapolation at other ends.
VectorXd extend(const VectorXd& v, EndKind left, EndKind right, bool odd) {
  const int N = static_cast<int>(v.size());
  VectorXd e(N + 2 * kGhost);
  e.segment(kGhost, N) = v;
  auto extrap = [](double f0, double f1, double f2, double f3, double f4, double f5) {
    return 6 * f0 - 15 * f1 + 20 * f2 - 15 * f3 + 6 * f4 - f5;
  };
  const double sg = odd ? -1.0 : 1.0;
  if (left == EndKind::Pole) {
    for (int k = 1; k <= kGhost; ++k) e(kGhost - k) = sg * v(k - 1);
  } else {
    e(1) = extrap(v(0), v(1), v(2), v(3), v(4), v(5));
    e(0) = extrap(e(1), v(0), v(1), v(2), v(3), v(4));
  }
  if (right == EndKind::Pole) {
    for (int k = 1; k <= kGhost; ++k) e(kGhost + N - 1 + k) = sg * v(N - k);
  } else {
    e(kGhost + N) = extrap(v(N - 1), v(N - 2), v(N - 3), v(N - 4), v(N - 5), v(N - 6));
    e(kGhost + N + 1) =
        extrap(e(kGhost + N), v(N - 1), v(N - 2), v(N - 3), v(N - 4), v(N - 5));
  }
  return e;
}

void d1d2(const VectorXd& e, double h, VectorXd& d1, VectorXd& d2) {
  const int N = static_cast<int>(e.size()) - 2 * kGhost;
  d1.resize(N);
  d2.resize(N);
  for (int i = 0; i < N; ++i) {
    const double* f = e.data() + i + kGhost;
    d1(i) = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h);
    d2(i) = (-f[-2] + 16 * f[-1] - 30 * f[0] + 16 * f[1] - f[2]) / (12 * h * h);
  }
}

void d1only(const VectorXd& e, double h, VectorXd& d1) {
  const int N = static_cast<int>(e.size()) - 2 * kGhost;
  d1.resize(N);
  for (int i = 0; i < N; ++i) {
    const double* f = e.data() + i + kGhost;
    d1(i) = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * h);
  }
}

// Even polynomial in s through samples at s = h/2, 3h/2, 5h/2, evaluated at x h.
double even_fit(double v0, double v1, double v2, double x) {
  const double X = x * x, x0 = 0.25, x1 = 2.25, x2 = 6.25;
  return v0 * (X - x1) * (X - x2) / ((x0 - x1) * (x0 - x2)) +
         v1 * (X - x0) * (X - x2) / ((x1 - x0) * (x1 - x2)) +
         v2 * (X - x0) * (X - x1) / ((x2 - x0) * (x2 - x1));
}

struct Derivs {
  VectorXd phi_s, psi_s, phi_r, phi_rr;
};

Derivs derivs(const VectorXd& phi, const VectorXd& psi, double h, EndKind left, EndKind right) {
  VectorXd pss;
  Derivs d;
  d1d2(extend(phi, left, right, true), h, d.phi_s, pss);
  d1only(extend(psi, left, right, false), h, d.psi_s);
  d.phi_r = d.phi_s.cwiseQuotient(psi);
  d.phi_rr = (pss - d.phi_s.cwiseProduct(d.psi_s).cwiseQuotient(psi))
                 .cwiseQuotient(psi.cwiseProduct(psi));
  return d;
}

// Ricci-DeTurck right-hand side against the background ds^2 + f^2 g_{S^2}:
// dg/dt = -2 Ric + L_V g with V = psi_s/psi^3 - 2 phi_s/(phi psi^2) + 2 f f_s/phi^2.
void rhs(const FlowState& st, const VectorXd& phi, const VectorXd& psi, VectorXd& dphi,
         VectorXd& dpsi) {
  const int N = st.size();
  const double h = st.h();
  const Derivs d = derivs(phi, psi, h, st.left, st.right);
  VectorXd V(N);
  for (int i = 0; i < N; ++i) {
    const double q = psi(i), p = phi(i);
    V(i) = d.psi_s(i) / (q * q * q) - 2 * d.phi_s(i) / (p * q * q) + st.bg2(i) / (p * p);
  }
  // psi equation with the second-derivative terms of phi cancelled by hand:
  // psi_t = (psi_s/psi^2)_s + 2 phi_s^2/(phi^2 psi) + (bg2 psi/phi^2)_s,
  // the last term expanded so the 1/s^2 parts cancel pointwise.
  VectorXd F = d.psi_s.cwiseQuotient(psi.cwiseProduct(psi)), Fs, b_s;
  d1only(extend(F, st.left, st.right, true), h, Fs);
  d1only(extend(st.bg2, st.left, st.right, true), h, b_s);
  dphi.resize(N);
  dpsi.resize(N);
  for (int i = 0; i < N; ++i) {
    const double r = d.phi_r(i), p = phi(i), q = psi(i), ps = d.phi_s(i);
    dphi(i) = d.phi_rr(i) - (1 - r * r) / p + V(i) * ps;
    const double sing = (b_s(i) * q * p - 2 * st.bg2(i) * q * ps) / (p * p * p) +
                        2 * ps * ps / (p * p * q);
    dpsi(i) = Fs(i) + st.bg2(i) * d.psi_s(i) / (p * p) + sing;
  }
  if (st.left == EndKind::Fixed) dphi(0) = dpsi(0) = 0;
  if (st.right == EndKind::Fixed) dphi(N - 1) = dpsi(N - 1) = 0;
}

VectorXd make_grid(double s0, double s1, int N, EndKind l, EndKind r) {
  const double ol = l == EndKind::Pole ? 0.5 : 0.0, orr = r == EndKind::Pole ? 0.5 : 0.0;
  const double h = (s1 - s0) / (N - 1 + ol + orr);
  VectorXd s(N);
  for (int i = 0; i < N; ++i) s(i) = s0 + (i + ol) * h;
  return s;
}

FlowState make_state(const VectorXd& s, const VectorXd& phi, const VectorXd& psi, EndKind l,
                     EndKind r) {
  FlowState st;
  st.s = s;
  st.phi = phi;
  st.psi = psi;
  st.left = l;
  st.right = r;
  // Background warp f = phi/psi of the initial data (unit slope at poles).
  VectorXd f = phi.cwiseQuotient(psi), fs, fss;
  d1d2(extend(f, l, r, true), s(1) - s(0), fs, fss);
  st.bg2 = 2 * f.cwiseProduct(fs);
  update_diagnostics(st);
  return st;
}

void check_grid(int grid) {
  if (grid < 128) fail(Errc::InvalidInput, "flow grid needs at least 128 nodes");
}

void validate_profile(const FlowState& st) {
  const int N = st.size();
  for (int i = 0; i < N; ++i) {
    if (!std::isfinite(st.phi(i)) || !(st.psi(i) > 0))
      fail(Errc::InvalidProfile, "non-finite phi or non-positive psi");
    if (!(st.phi(i) > 0)) fail(Errc::InvalidProfile, "phi must be positive away from poles");
  }
  // dphi/darc at the pole from the cubic through the pole and three nodes.
  const double h = st.h();
  auto pole = [&](int i) {
    const int d = i == 0 ? 1 : -1;
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
    double x = st.psi(i) * h / 2;
    for (int k = 0; k < 3; ++k) {
      const int j = i + d * k;
      if (k > 0) x += 0.5 * (st.psi(j) + st.psi(j - d)) * h;
      A.row(k) << x, x * x, x * x * x;
      b(k) = st.phi(j);
    }
    const double slope = A.fullPivLu().solve(b)(0);
    if (std::abs(slope - 1) > 1e-3) fail(Errc::InvalidProfile, "pole needs dphi/darc = +-1");
  };
  if (st.left == EndKind::Pole) pole(0);
  if (st.right == EndKind::Pole) pole(N - 1);
}

// Maximum of the quartic through the five nodes around the largest sample;
// the bare nodal maximum is only O(h^2) accurate.
double peak(const VectorXd& v) {
  int m = 0;
  const double vm = v.maxCoeff(&m);
  if (m < 2 || m + 2 >= v.size()) return vm;
  auto q = [&](double x) {
    double sum = 0;
    for (int j = -2; j <= 2; ++j) {
      double w = 1;
      for (int k = -2; k <= 2; ++k)
        if (k != j) w *= (x - k) / (j - k);
      sum += w * v(m + j);
    }
    return sum;
  };
  double a = -1, b = 1;
  for (int it = 0; it < 80; ++it) {
    const double x1 = a + (b - a) / 3, x2 = b - (b - a) / 3;
    (q(x1) < q(x2) ? a : b) = q(x1) < q(x2) ? x1 : x2;
  }
  return std::max(vm, q(0.5 * (a + b)));
}

}  // namespace

FlowCurvature flow_curvature(const FlowState& st) {
  const int N = st.size();
  const Derivs d = derivs(st.phi, st.psi, st.h(), st.left, st.right);
  FlowCurvature c;
  c.phi_r = d.phi_r;
  c.phi_rr = d.phi_rr;
  c.K_rad.resize(N);
  c.K_sph.resize(N);
  for (int i = 0; i < N; ++i) {
    c.K_rad(i) = -d.phi_rr(i) / st.phi(i);
    c.K_sph(i) = (1 - d.phi_r(i) * d.phi_r(i)) / (st.phi(i) * st.phi(i));
  }
  c.R = 4 * c.K_rad + 2 * c.K_sph;
  return c;
}

void update_diagnostics(FlowState& st) {
  const int N = st.size();
  const FlowCurvature c = flow_curvature(st);
  FlowDiagnostics& g = st.diag;
  g.K_sup = std::max(c.K_rad.maxCoeff(), c.K_sph.maxCoeff());
  g.R_max = peak(c.R);
  g.R_min = c.R.minCoeff();
  g.inj_lower = g.K_sup > 0 ? std::numbers::pi / std::sqrt(g.K_sup) : kInf;
  // Pole caps are excluded: the range starts at the first local max of phi
  // off a pole and ends at the last one.
  {
    int a = 0, b = N - 1;
    if (st.left == EndKind::Pole)
      while (a + 1 < N && st.phi(a + 1) >= st.phi(a)) ++a;
    if (st.right == EndKind::Pole)
      while (b > 0 && st.phi(b - 1) >= st.phi(b)) --b;
    g.phi_min = a <= b ? st.phi.segment(a, b - a + 1).minCoeff() : st.phi(a);
  }
  g.neck_index = -1;
  const double mid = 0.5 * (N - 1);
  // A neck is a local minimum with something strictly larger on both sides;
  // an exactly constant profile counts as a neck everywhere.
  VectorXd left_max(N), right_max(N);
  left_max(0) = st.phi(0);
  for (int i = 1; i < N; ++i) left_max(i) = std::max(left_max(i - 1), st.phi(i));
  right_max(N - 1) = st.phi(N - 1);
  for (int i = N - 2; i >= 0; --i) right_max(i) = std::max(right_max(i + 1), st.phi(i));
  const bool flat = st.phi.maxCoeff() == st.phi.minCoeff();
  for (int i = 2; i < N - 2; ++i) {
    if (!(st.phi(i) <= st.phi(i - 1) && st.phi(i) <= st.phi(i + 1))) continue;
    if (!flat && !(st.phi(i) < left_max(i) && st.phi(i) < right_max(i))) continue;
    const int j = g.neck_index;
    if (j < 0 || st.phi(i) < st.phi(j) ||
        (st.phi(i) == st.phi(j) && std::abs(i - mid) < std::abs(j - mid)))
      g.neck_index = i;
  }
  // |dphi/darc| extrapolated to each pole as an even function.
  g.pole_regularity = 0;
  if (st.left == EndKind::Pole)
    g.pole_regularity = std::max(
        g.pole_regularity, std::abs(even_fit(c.phi_r(0), c.phi_r(1), c.phi_r(2), 0) - 1));
  if (st.right == EndKind::Pole)
    g.pole_regularity =
        std::max(g.pole_regularity,
                 std::abs(-even_fit(c.phi_r(N - 1), c.phi_r(N - 2), c.phi_r(N - 3), 0) - 1));
}

EigenTriple flow_eigen_triple(const FlowState& st, int i) {
  const FlowCurvature c = flow_curvature(st);
  return EigenTriple(2 * c.K_sph(i), 2 * c.K_rad(i), 2 * c.K_rad(i));
}

namespace {

// Arclength of the half cell between a pole and its nearest node.
double pole_gap(const VectorXd& psi, int i0, int i1, int i2, double h) {
  const double a = even_fit(psi(i0), psi(i1), psi(i2), 0);
  const double m = even_fit(psi(i0), psi(i1), psi(i2), 0.25);
  return h / 12 * (a + 4 * m + psi(i0));
}

}  // namespace

Eigen::VectorXd arclength(const FlowState& st) {
  const int N = st.size();
  const double h = st.h();
  const VectorXd e = extend(st.psi, st.left, st.right, false);
  VectorXd a(N);
  a(0) = st.left == EndKind::Pole ? pole_gap(st.psi, 0, 1, 2, h) : 0.0;
  // Fourth-order cell integrals from the cubic through four neighbours.
  for (int i = 0; i + 1 < N; ++i) {
    const double* f = e.data() + i + kGhost;
    a(i + 1) = a(i) + h / 24 * (-f[-1] + 13 * f[0] + 13 * f[1] - f[2]);
  }
  return a;
}

WarpedMetric flow_metric(const FlowState& st) {
  const VectorXd a = arclength(st);
  const int N = st.size();
  const bool lp = st.left == EndKind::Pole, rp = st.right == EndKind::Pole;
  VectorXd t(N + lp + rp), p(N + lp + rp);
  if (lp) t(0) = p(0) = 0;
  t.segment(lp, N) = a;
  p.segment(lp, N) = st.phi;
  if (rp) {
    t(N + lp) = a(N - 1) + pole_gap(st.psi, N - 1, N - 2, N - 3, st.h());
    p(N + lp) = 0;
  }
  return make_metric(sampled_spec(t, p, 3));
}

FlowState init_round_sphere(double a0, int grid) {
  check_grid(grid);
  if (!(a0 > 0)) fail(Errc::InvalidProfile, "radius must be positive");
  const VectorXd s = make_grid(0, std::numbers::pi, grid, EndKind::Pole, EndKind::Pole);
  const VectorXd phi = a0 * s.array().sin();
  FlowState st = make_state(s, phi, VectorXd::Constant(grid, a0), EndKind::Pole, EndKind::Pole);
  validate_profile(st);
  return st;
}

FlowState init_dumbbell(double A, int grid, double cluster) {
  check_grid(grid);
  if (!(A > 0 && A < 1)) fail(Errc::InvalidProfile, "dumbbell needs 0 < A < 1");
  if (!(cluster >= 0 && cluster < 1)) fail(Errc::InvalidInput, "cluster must be in [0, 1)");
  // Background coordinate u with arclength x = u + cluster/2 sin 2u, so psi = 1 + cluster cos 2u.
  const VectorXd u = make_grid(0, std::numbers::pi, grid, EndKind::Pole, EndKind::Pole);
  VectorXd phi(grid), psi(grid);
  for (int i = 0; i < grid; ++i) {
    const double x = u(i) + cluster / 2 * std::sin(2 * u(i));
    const double sn = std::sin(x);
    phi(i) = sn * (1 - A * sn * sn);
    psi(i) = 1 + cluster * std::cos(2 * u(i));
  }
  FlowState st = make_state(u, phi, psi, EndKind::Pole, EndKind::Pole);
  validate_profile(st);
  return st;
}

FlowState init_flow(const WarpSpec& spec, int grid, EndKind far) {
  check_grid(grid);
  if (spec.n != 3) fail(Errc::InvalidProfile, "flow is implemented for n = 3");
  if (far == EndKind::Pole) fail(Errc::InvalidInput, "far-field kind cannot be a pole");
  if (!std::isfinite(spec.t_min) || !std::isfinite(spec.t_max))
    fail(Errc::InvalidProfile, "flow needs a finite (truncated) domain");
  const WarpedMetric m = make_metric(spec);
  const EndKind l = spec.pole_min ? EndKind::Pole : far;
  const EndKind r = spec.pole_max ? EndKind::Pole : far;
  if (l == EndKind::Pole && std::abs(m.dphi(spec.t_min) - 1) > 1e-9)
    fail(Errc::InvalidProfile, "pole slope must be 1");
  if (r == EndKind::Pole && std::abs(m.dphi(spec.t_max) + 1) > 1e-9)
    fail(Errc::InvalidProfile, "pole slope must be -1");
  const VectorXd s = make_grid(spec.t_min, spec.t_max, grid, l, r);
  VectorXd phi(grid);
  for (int i = 0; i < grid; ++i) phi(i) = m.phi(s(i));
  FlowState st = make_state(s, phi, VectorXd::Ones(grid), l, r);
  validate_profile(st);
  return st;
}

double cfl_dt(const FlowState& st, double cfl) {
  // The 1/phi^2 terms are as stiff as the diffusion where phi < psi h.
  const double dx = std::min((st.psi * st.h()).minCoeff(), st.phi.cwiseAbs().minCoeff());
  return cfl * dx * dx;
}

FlowState step(const FlowState& st, double dt, double cfl) {
  if (!(dt > 0)) fail(Errc::InvalidInput, "dt must be positive");
  const double bound = cfl_dt(st, cfl);
  if (dt > bound * (1 + 1e-12)) {
    char b[128];
    std::snprintf(b, sizeof b, "dt = %.6g exceeds the stability bound %.6g", dt, bound);
    fail(Errc::StepTooLarge, b);
  }
  VectorXd k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q;
  rhs(st, st.phi, st.psi, k1p, k1q);
  rhs(st, st.phi + 0.5 * dt * k1p, st.psi + 0.5 * dt * k1q, k2p, k2q);
  rhs(st, st.phi + 0.5 * dt * k2p, st.psi + 0.5 * dt * k2q, k3p, k3q);
  rhs(st, st.phi + dt * k3p, st.psi + dt * k3q, k4p, k4q);
  FlowState out = st;
  out.phi += dt / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
  out.psi += dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q);
  out.t = st.t + dt;
  for (int i = 0; i < out.size(); ++i) {
    const bool bad = !std::isfinite(out.phi(i)) || !std::isfinite(out.psi(i)) ||
                     !(out.psi(i) > 0) || !(out.phi(i) > 0);
    if (bad) {
      char b[160];
      std::snprintf(b, sizeof b, "phi <= 0 at s = %.9g, t = %.12g", out.s(i), out.t);
      fail(Errc::SingularityReached, b);
    }
  }
  update_diagnostics(out);
  return out;
}

FlowConfig parse_flow_config(std::istream& in) {
  FlowConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string x) {
      const auto a = x.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      return x.substr(a, x.find_last_not_of(" \t\r") - a + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos)
      fail(Errc::InvalidInput, "config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    auto num = [&] {
      try {
        size_t pos = 0;
        const double v = std::stod(val, &pos);
        if (pos != val.size()) throw std::invalid_argument(val);
        return v;
      } catch (const std::exception&) {
        fail(Errc::InvalidInput, "config key " + key + ": not a number: " + val);
      }
    };
    if (key == "profile") c.profile = val;
    else if (key == "A") c.A = num();
    else if (key == "a0") c.a0 = num();
    else if (key == "sigma") c.sigma = num();
    else if (key == "cluster") c.cluster = num();
    else if (key == "length") c.length = num();
    else if (key == "grid") c.grid = static_cast<int>(num());
    else if (key == "cfl") c.cfl = num();
    else if (key == "stop_rmax") c.stop_rmax = num();
    else if (key == "stop_phi_min") c.stop_phi_min = num();
    else if (key == "stop_time") c.stop_time = num();
    else if (key == "wall_budget") c.wall_budget = num();
    else if (key == "snapshot_every") c.snapshot_every = static_cast<long>(num());
    else if (key == "snapshot_rfactor") c.snapshot_rfactor = num();
    else fail(Errc::InvalidInput, "unknown config key: " + key);
  }
  if (!(c.cfl > 0 && c.cfl <= 0.4)) fail(Errc::InvalidInput, "cfl must be in (0, 0.4]");
  if (c.snapshot_every < 1) fail(Errc::InvalidInput, "snapshot_every must be >= 1");
  if (!(c.snapshot_rfactor > 1)) fail(Errc::InvalidInput, "snapshot_rfactor must be > 1");
  return c;
}

FlowConfig read_flow_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidInput, "cannot open " + path);
  return parse_flow_config(in);
}

FlowState init_from_config(const FlowConfig& c) {
  if (c.profile == "dumbbell") return init_dumbbell(c.A, c.grid, c.cluster);
  if (c.profile == "round") return init_round_sphere(c.a0, c.grid);
  if (c.profile == "cylinder")
    return init_flow(cylinder_spec(c.a0, -c.length / 2, c.length / 2), c.grid, EndKind::Fixed);
  if (c.profile == "flare") {
    WarpSpec s = flare_spec(c.sigma, 3, c.length);
    s.truncated = true;
    return init_flow(s, c.grid, EndKind::Free);
  }
  fail(Errc::InvalidInput, "unknown flow profile: " + c.profile);
}

RunHistory run_flow(const FlowState& start, const FlowConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();
  RunHistory h;
  FlowState st = start;
  update_diagnostics(st);
  h.snapshots.push_back(st);
  h.min_R_seen = st.diag.R_min;
  double next_r = st.diag.R_max * cfg.snapshot_rfactor;
  long since = 0;
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t_start).count(); };
  for (;;) {
    if (st.diag.R_max >= cfg.stop_rmax) {
      h.stop_reason = "rmax";
      break;
    }
    if (st.diag.phi_min <= cfg.stop_phi_min) {
      h.stop_reason = "phi_min";
      break;
    }
    if (st.t >= cfg.stop_time) {
      h.stop_reason = "time";
      break;
    }
    if (cfg.wall_budget > 0 && elapsed() > cfg.wall_budget) {
      h.stop_reason = "wall";
      break;
    }
    double dt = cfl_dt(st, cfg.cfl);
    if (st.t + dt > cfg.stop_time) dt = cfg.stop_time - st.t;
    try {
      st = step(st, dt, cfg.cfl);
    } catch (const Error& e) {
      if (e.code() != Errc::SingularityReached) throw;
      h.stop_reason = "singularity";
      break;
    }
    if (st.t > cfg.stop_time * (1 - 1e-15)) st.t = std::min(st.t, cfg.stop_time);
    ++h.steps;
    ++since;
    h.min_R_seen = std::min(h.min_R_seen, st.diag.R_min);
    if (since >= cfg.snapshot_every || st.diag.R_max >= next_r) {
      h.snapshots.push_back(st);
      since = 0;
      while (next_r <= st.diag.R_max) next_r *= cfg.snapshot_rfactor;
    }
  }
  if (h.snapshots.back().t != st.t) h.snapshots.push_back(st);
  h.wall_seconds = elapsed();
  return h;
}

RescaledState rescale_state(const FlowState& st, int i) {
  if (i < 0 || i >= st.size()) fail(Errc::OutOfDomain, "base node outside the grid");
  const double R = flow_curvature(st).R(i);
  if (!(R > 0)) fail(Errc::RequiresPositiveScalar, "rescaling needs R > 0 at the base point");
  RescaledState r;
  r.state = st;
  const double k = std::sqrt(R);
  r.state.phi *= k;
  r.state.psi *= k;
  r.state.t = 0;
  update_diagnostics(r.state);
  r.base_index = i;
  r.base_s = st.s(i);
  r.base_t = st.t;
  r.factor = R;
  return r;
}

RescaledState rescale_at(const RunHistory& h, double s_i, double t_i) {
  for (const FlowState& st : h.snapshots) {
    if (std::abs(st.t - t_i) > 1e-12 * std::max(1.0, std::abs(t_i))) continue;
    if (!(s_i >= st.s(0) && s_i <= st.s(st.size() - 1)))
      fail(Errc::OutOfDomain, "base point outside the grid");
    const int i = static_cast<int>(std::lround((s_i - st.s(0)) / st.h()));
    return rescale_state(st, i);
  }
  char b[96];
  std::snprintf(b, sizeof b, "no snapshot stored at t = %.12g", t_i);
  fail(Errc::NotStored, b);
}

NeckSample neck_at(const FlowState& st0, int k, double L, double eps_target) {
  FlowState st = st0;
  update_diagnostics(st);
  NeckSample n;
  n.t = st.t;
  n.rmax = st.diag.R_max;
  const int c = st.diag.neck_index;
  if (c < 0) return n;
  const RescaledState rs = rescale_state(st, c);
  const FlowState& u = rs.state;
  n.found = true;
  n.center_s = u.s(c);
  n.delta_star = necklike_delta(flow_eigen_triple(u, c));

  const WarpedMetric m = flow_metric(u);
  const VectorXd arc = arclength(u);
  const int N = u.size();
  // z = int psi/phi ds relative to the center, through a spline of psi/phi.
  const CubicSpline sp(u.s, u.psi.cwiseQuotient(u.phi));
  VectorXd z(N);
  z(0) = 0;
  const double hs = u.h();
  for (int i = 0; i + 1 < N; ++i) {
    const Eigen::Vector4d q = sp.coefficients(i);
    z(i + 1) = z(i) + hs * (q(0) + hs * (q(1) / 2 + hs * (q(2) / 3 + hs * q(3) / 4)));
  }
  z.array() -= z(c);
  auto arc_at = [&](double zz) {
    const double* b = z.data();
    const int j = static_cast<int>(std::upper_bound(b, b + N, zz) - b);
    const int i = std::clamp(j - 1, 0, N - 2);
    const double w = (zz - z(i)) / (z(i + 1) - z(i));
    return arc(i) + w * (arc(i + 1) - arc(i));
  };
  const double Lmax = std::min(-z(0), z(N - 1));
  auto eps_of = [&](double half) {
    return certify_neck(m, arc_at(-half), arc_at(half), k).eps;
  };
  n.window_fits = L < Lmax;
  if (n.window_fits) n.eps_at_L = eps_of(L);
  const double cap = 0.999 * Lmax;
  double a = 0.05, b = cap;
  if (eps_of(a) > eps_target) {
    n.L_achieved = 0;
  } else if (eps_of(b) <= eps_target) {
    n.L_achieved = b;
  } else {
    for (int it = 0; it < 24 && b - a > 1e-3 * a; ++it) {
      const double mid = 0.5 * (a + b);
      (eps_of(mid) <= eps_target ? a : b) = mid;
    }
    n.L_achieved = a;
  }
  return n;
}

std::vector<NeckSample> track_neck(const RunHistory& h, int k, double L, double eps_target,
                                   int cadence) {
  if (h.snapshots.empty()) fail(Errc::InvalidInput, "empty run history");
  if (cadence < 1) fail(Errc::InvalidInput, "cadence must be >= 1");
  const double p0 = h.snapshots.front().diag.phi_min, p1 = h.snapshots.back().diag.phi_min;
  if (!(p1 <= 0.5 * p0)) fail(Errc::InvalidRange, "run too short: min phi has not halved");
  std::vector<NeckSample> out;
  const int S = static_cast<int>(h.snapshots.size());
  for (int i = 0; i < S; i += cadence) out.push_back(neck_at(h.snapshots[i], k, L, eps_target));
  if ((S - 1) % cadence != 0) out.push_back(neck_at(h.snapshots.back(), k, L, eps_target));
  return out;
}

std::string snapshot_csv(const FlowState& st) {
  std::string s = "s,psi,phi\n";
  char b[96];
  for (int i = 0; i < st.size(); ++i) {
    std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g\n", st.s(i), st.psi(i), st.phi(i));
    s += b;
  }
  return s;
}

std::string snapshot_manifest(const FlowState& st) {
  char b[512];
  std::snprintf(b, sizeof b,
                "t = %.17g\ngrid = %d\nK_sup = %.17g\nR_max = %.17g\nR_min = %.17g\n"
                "phi_min = %.17g\nneck_index = %d\ninj_lower = %.17g\npole_regularity = %.17g\n",
                st.t, st.size(), st.diag.K_sup, st.diag.R_max, st.diag.R_min, st.diag.phi_min,
                st.diag.neck_index, st.diag.inj_lower, st.diag.pole_regularity);
  return b;
}

std::string neck_series_header() { return "t,eps,L,rmax"; }

std::string neck_series_row(const NeckSample& n) {
  char b[160];
  if (!n.found || !n.window_fits)
    std::snprintf(b, sizeof b, "%.17g,,%.17g,%.17g", n.t, n.L_achieved, n.rmax);
  else
    std::snprintf(b, sizeof b, "%.17g,%.17g,%.17g,%.17g", n.t, n.eps_at_L, n.L_achieved, n.rmax);
  return b;
}

}  // namespace neckscope
