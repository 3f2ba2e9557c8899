#include "neckscope/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "neckscope/acceptance.hpp"
#include "neckscope/asymptotic_invariants.hpp"
#include "neckscope/constant_chain.hpp"
#include "neckscope/curvature_pinching.hpp"
#include "neckscope/error.hpp"
#include "neckscope/hypersurface_gauss_bonnet.hpp"
#include "neckscope/neck_analysis.hpp"
#include "neckscope/numerics.hpp"
#include "neckscope/ricci_flow_sim.hpp"
#include "neckscope/warped_geometry.hpp"

namespace neckscope {

const std::vector<CommandBinding>& command_registry() {
  static const std::vector<CommandBinding> r = {
      {"warped_geometry", "make_metric", "metric info"},
      {"warped_geometry", "curvature_at", "metric curvature"},
      {"warped_geometry", "distance", "metric distance"},
      {"warped_geometry", "geodesic_shoot", "metric geodesic"},
      {"warped_geometry", "ball_volume", "volume ball"},
      {"warped_geometry", "annulus_volume_mc", "volume annulus"},
      {"neck_analysis", "normalize_parametrization", "neck normalize"},
      {"neck_analysis", "certify_neck", "neck certify"},
      {"neck_analysis", "certify_absolute_neck", "neck absolute"},
      {"neck_analysis", "epsilon_prime", "neck epsprime"},
      {"neck_analysis", "verify_absolute_conversion", "neck convert"},
      {"asymptotic_invariants", "ascr_profile", "ascr"},
      {"asymptotic_invariants", "avr", "volume avr"},
      {"asymptotic_invariants", "theta_profile", "busemann theta"},
      {"asymptotic_invariants", "busemann_estimate", "busemann estimate"},
      {"asymptotic_invariants", "busemann_containment_check", "busemann contain"},
      {"asymptotic_invariants", "bishop_gromov_check", "volume bishop"},
      {"asymptotic_invariants", "relative_volume_report", "volume relative"},
      {"hypersurface_gauss_bonnet", "parallel_surface", "gb surface"},
      {"hypersurface_gauss_bonnet", "weingarten_bound_check", "gb weingarten"},
      {"hypersurface_gauss_bonnet", "gauss_bonnet_integrand", "gb integrand"},
      {"hypersurface_gauss_bonnet", "q_bound_check", "gb q"},
      {"hypersurface_gauss_bonnet", "area_lower_bound_check", "gb area"},
      {"curvature_pinching", "p_quantity", "pinch p"},
      {"curvature_pinching", "necklike_delta", "pinch necklike"},
      {"curvature_pinching", "lemma_c_check", "pinch sample"},
      {"curvature_pinching", "g_quantity", "pinch g"},
      {"curvature_pinching", "j_quantity", "pinch j"},
      {"curvature_pinching", "dichotomy_check", "pinch dichotomy"},
      {"curvature_pinching", "integrate_curvature_ode", "pinch ode"},
      {"ricci_flow_sim", "init_flow", "flow init"},
      {"ricci_flow_sim", "step", "flow run"},
      {"ricci_flow_sim", "rescale_at", "flow rescale"},
      {"ricci_flow_sim", "track_neck", "flow neck"},
      {"constant_chain", "delta_of_Lb", "chain delta"},
      {"constant_chain", "ascr_lower_bound", "chain bound"},
      {"constant_chain", "constants_for", "chain constants"},
      {"cli", "suite", "suite"},
  };
  return r;
}

namespace {

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

template <class... T>
std::string row(const T&... v) {
  std::string s;
  auto add = [&](const auto& x) {
    if (!s.empty()) s += ',';
    if constexpr (std::is_convertible_v<decltype(x), std::string>) s += x;
    else if constexpr (std::is_same_v<std::decay_t<decltype(x)>, bool>) s += x ? "1" : "0";
    else if constexpr (std::is_integral_v<std::decay_t<decltype(x)>>) s += std::to_string(x);
    else s += num(x);
  };
  (add(v), ...);
  return s;
}

struct Outcome {
  std::string body;
  std::string failed;  // the failing row, empty when every check passed
  bool csv = true;
};

Outcome table(const std::string& header, const std::vector<std::string>& rows) {
  Outcome o;
  o.body = header + "\n";
  for (const auto& r : rows) o.body += r + "\n";
  return o;
}

Outcome checked(const std::string& header, const std::string& r, bool pass) {
  Outcome o = table(header, {r});
  if (!pass) o.failed = r;
  return o;
}

struct MetricOpts {
  std::string preset = "flare";
  double sigma = 0.5, a = 1, c = 1, A = 0.8;
  int n = 3;
  double tmin = NAN, tmax = NAN, scale = 1;
  std::string profile;
};

void add_metric_opts(CLI::App* s, MetricOpts& o) {
  s->add_option("--preset", o.preset, "cylinder | flat | sphere | flare | dumbbell | sampled")
      ->check(CLI::IsMember({"cylinder", "flat", "sphere", "flare", "dumbbell", "sampled"}));
  s->add_option("--sigma", o.sigma, "flare slope");
  s->add_option("--a", o.a, "sphere radius");
  s->add_option("--c", o.c, "cylinder radius");
  s->add_option("--A", o.A, "dumbbell pinch");
  s->add_option("--n", o.n, "dimension");
  s->add_option("--tmin", o.tmin, "cylinder start");
  s->add_option("--tmax", o.tmax, "truncation end");
  s->add_option("--scale", o.scale, "homothety factor");
  s->add_option("--profile", o.profile, "t,phi CSV for the sampled preset");
}

WarpedMetric build_metric(const MetricOpts& o) {
  WarpSpec s;
  const bool has_max = !std::isnan(o.tmax);
  if (o.preset == "cylinder") {
    s = cylinder_spec(o.c, std::isnan(o.tmin) ? -10 : o.tmin, has_max ? o.tmax : 10, o.n);
  } else if (o.preset == "flat") {
    s = flat_spec(o.n, has_max ? o.tmax : kInf);
  } else if (o.preset == "sphere") {
    s = sphere_spec(o.a, o.n);
  } else if (o.preset == "flare") {
    s = flare_spec(o.sigma, o.n, has_max ? o.tmax : kInf);
  } else if (o.preset == "dumbbell") {
    s = dumbbell_spec(o.A, o.n);
  } else {
    if (o.profile.empty()) fail(Errc::InvalidInput, "the sampled preset needs --profile");
    s = read_sampled_csv(o.profile, o.n);
  }
  if (has_max && std::isfinite(o.tmax) && o.preset != "cylinder") s.truncated = true;
  if (o.scale != 1) s = scaled(s, o.scale);
  return make_metric(s);
}

// "t,angle" in the meridian plane.
Point point_of(const WarpedMetric& m, const std::vector<double>& v, const char* what) {
  if (v.size() != 2) fail(Errc::InvalidInput, std::string(what) + " expects t,angle");
  return meridian_point(m, v[0], v[1]);
}

std::vector<double> log_grid(double a, double b, int per_decade) {
  if (!(a > 0 && b >= a && per_decade > 0)) fail(Errc::InvalidInput, "radius grid: need 0 < rmin <= rmax");
  std::vector<double> g;
  const int N = std::max(1, static_cast<int>(std::round(per_decade * std::log10(b / a))));
  for (int i = 0; i <= N; ++i) g.push_back(a * std::pow(b / a, double(i) / N));
  return g;
}

EigenTriple triple_of(const std::vector<double>& v) {
  if (v.size() != 3) fail(Errc::InvalidInput, "--e expects lambda,mu,nu");
  return EigenTriple(v[0], v[1], v[2]);
}

std::string status_name(LemmaStatus s) {
  switch (s) {
    case LemmaStatus::Pass: return "pass";
    case LemmaStatus::Fail: return "fail";
    case LemmaStatus::NotApplicable: return "not_applicable";
  }
  return "";
}

// Every option any command reads; CLI11 binds into these.
struct Opts {
  std::string out, svg, config;
  std::uint64_t seed = 7;
  int jobs = 0;
  MetricOpts metric;
  std::vector<double> p, q, x, window, e;
  std::vector<double> list;
  double from = NAN, to = NAN;
  int points = 101;
  double psi = 0, length = 1;
  double r = 1, rho = 1, r1 = 1, r2 = 2, Lb = 16;
  long samples = 100000;
  double rmin = 1, rmax = 1e3;
  int per_decade = 10;
  int segments = 64, rays = 128;
  int k = 2;
  double eps = NAN, L = NAN, delta = NAN, eta2 = 0.5, epsK = NAN, cn = 0;
  std::string perturbation = "oscillating";
  double amplitude = -1;
  int directions = 48;
  double t = -1, gamma = 1, c = 0.125, t0 = 0, t1 = 1, rtol = 1e-9;
  long n_samples = 0;
  FlowConfig flow;
  std::string dir;
  double base_s = NAN, base_t = NAN, eps_target = 0.1;
  int cadence = 1;
  int dim = 3;
  double C0 = 1, L0 = 16, eta1 = 0.5;
  ChainConfig chain;
  std::string suite = "quick";
};

using Action = std::function<Outcome()>;

void add_flow_opts(CLI::App* s, FlowConfig& f) {
  s->add_option("--profile", f.profile, "dumbbell | round | cylinder | flare")
      ->check(CLI::IsMember({"dumbbell", "round", "cylinder", "flare"}));
  s->add_option("--A", f.A);
  s->add_option("--a0", f.a0);
  s->add_option("--sigma", f.sigma);
  s->add_option("--cluster", f.cluster);
  s->add_option("--length", f.length);
  s->add_option("--grid", f.grid);
  s->add_option("--cfl", f.cfl);
  s->add_option("--stop_rmax", f.stop_rmax);
  s->add_option("--stop_phi_min", f.stop_phi_min);
  s->add_option("--stop_time", f.stop_time);
  s->add_option("--wall_budget", f.wall_budget);
  s->add_option("--snapshot_every", f.snapshot_every);
  s->add_option("--snapshot_rfactor", f.snapshot_rfactor);
}

std::string diag_header() { return "t,R_max,R_min,phi_min,K_sup,pole_regularity,neck_index"; }
std::string diag_row(const FlowState& st) {
  const FlowDiagnostics& d = st.diag;
  return row(st.t, d.R_max, d.R_min, d.phi_min, d.K_sup, d.pole_regularity, d.neck_index);
}

Outcome metric_curvature(const WarpedMetric& m, const Opts& o) {
  const double lo = std::isnan(o.from) ? m.t_min() : o.from;
  const double hi = std::isnan(o.to) ? (std::isfinite(m.t_max()) ? m.t_max() : lo + 10) : o.to;
  if (!(hi > lo) || o.points < 2) fail(Errc::InvalidRange, "need --from < --to and --points >= 2");
  std::vector<std::string> rows;
  for (int i = 0; i < o.points; ++i) {
    const double t = lo + (hi - lo) * i / (o.points - 1);
    const CurvatureSample c = curvature_at(m, t);
    rows.push_back(row(t, m.phi(t), c.K_rad, c.K_sph, c.R));
  }
  return table("t,phi,K_rad,K_sph,R", rows);
}

Outcome pinch_sweep(const Opts& o) {
  if (o.n_samples <= 0) fail(Errc::InvalidInput, "--n must be positive");
  constexpr long kBatch = 1 << 16;
  const int nb = static_cast<int>((o.n_samples + kBatch - 1) / kBatch);
  struct Part {
    long checked = 0, violations = 0;
    double worst = kInf;
    std::string first;
  };
  std::vector<Part> parts(nb);
  parallel_batches(nb, o.jobs, [&](int b) {
    Rng g(batch_seed(o.seed, b));
    Part& p = parts[b];
    const long count = std::min(kBatch, o.n_samples - b * kBatch);
    for (long i = 0; i < count; ++i) {
      auto sgn = [&] { return g.uniform() < 0.5 ? -1.0 : 1.0; };
      const double x = g.uniform(), y = g.uniform(), z = g.uniform();
      const EigenTriple e(sgn() * x, sgn() * y, sgn() * z);
      const double d = max_admissible_delta(e);
      if (!(d > 0)) continue;
      const LemmaCResult l = lemma_c_check(e, d);
      ++p.checked;
      p.worst = std::min(p.worst, l.ratio);
      if (l.status == LemmaStatus::Fail && ++p.violations == 1)
        p.first = row(e.lambda, e.mu, e.nu, d, l.P, l.rhs);
    }
  });
  Part all;
  for (const Part& p : parts) {
    all.checked += p.checked;
    all.violations += p.violations;
    all.worst = std::min(all.worst, p.worst);
    if (all.first.empty()) all.first = p.first;
  }
  Outcome out = table("samples,seed,checked,violations,min_ratio",
                      {row(o.n_samples, static_cast<long>(o.seed), all.checked, all.violations,
                           all.worst)});
  if (all.violations) out.failed = "first violation lambda,mu,nu,delta,P,rhs = " + all.first;
  return out;
}

void apply_config(CLI::App* leaf, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::InvalidInput, "cannot read config " + path);
  std::string line;
  int lineno = 0;
  auto trim = [](const std::string& x) {
    const auto a = x.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return x.substr(a, x.find_last_not_of(" \t\r") - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(Errc::InvalidInput, path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    CLI::Option* opt = nullptr;
    for (CLI::App* a = leaf; a && !opt; a = a->get_parent()) opt = a->get_option_no_throw("--" + key);
    if (!opt || key == "config")
      fail(Errc::InvalidInput, path + ":" + std::to_string(lineno) + ": unknown key " + key);
    if (opt->count() > 0) continue;  // the command line wins
    try {
      opt->add_result(val);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      fail(Errc::InvalidInput, path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

CLI::App* selected_leaf(CLI::App* app) {
  for (;;) {
    const auto subs = app->get_subcommands();
    if (subs.empty()) return app;
    app = subs.front();
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Opts o;
  CLI::App app{"neckscope: warped-product geometry, neck certificates, and rotationally "
               "symmetric Ricci flow experiments"};
  app.name("neckscope");
  app.require_subcommand(1);
  app.add_option("--out", o.out, "write CSV here instead of stdout");
  app.add_option("--svg", o.svg, "also write a line plot of the CSV");
  app.add_option("--seed", o.seed, "random seed");
  app.add_option("--jobs", o.jobs, "worker threads (default NECKSCOPE_JOBS, else 1)");
  app.add_option("--config", o.config, "flat key=value file; flags override it");
  app.fallthrough();

  std::map<CLI::App*, Action> actions;
  auto group = [&](const std::string& name, const std::string& help) {
    CLI::App* g = app.add_subcommand(name, help);
    g->require_subcommand(1);
    g->fallthrough();
    return g;
  };
  auto leaf = [&](CLI::App* parent, const std::string& name, const std::string& help, bool metric,
                  Action a) {
    CLI::App* s = parent->add_subcommand(name, help);
    if (metric) add_metric_opts(s, o.metric);
    s->fallthrough();
    actions[s] = std::move(a);
    return s;
  };
  auto window_opt = [&](CLI::App* s) {
    s->add_option("--window", o.window, "t0,t1 (required)")->delimiter(',')->expected(2);
  };
  auto window = [&] {
    if (o.window.size() != 2) fail(Errc::InvalidWindow, "--window expects t0,t1");
    return std::pair{o.window[0], o.window[1]};
  };
  auto pt = [](CLI::App* s, const std::string& name, std::vector<double>& v, bool required) {
    s->add_option(name, v, required ? "t,angle (required)" : "t,angle")->delimiter(',')->expected(2);
  };
  auto rgrid = [&](CLI::App* s) {
    s->add_option("--rmin", o.rmin);
    s->add_option("--rmax", o.rmax);
    s->add_option("--per-decade", o.per_decade);
  };
  auto M = [&] { return build_metric(o.metric); };

  // ---------------------------------------------------------------- metric
  CLI::App* metric = group("metric", "warped metrics: presets, curvature, distance, geodesics");
  leaf(metric, "info", "metric summary", true, [&] {
    const WarpedMetric m = M();
    const WarpSpec& s = m.spec();
    return table("family,n,t_min,t_max,pole_min,pole_max,noncompact,scale",
                 {row(family_name(s.family), s.n, s.t_min, s.t_max, s.pole_min, s.pole_max,
                      m.noncompact(), s.scale)});
  });
  CLI::App* s = leaf(metric, "curvature", "curvatures on a uniform t grid", true,
                     [&] { return metric_curvature(M(), o); });
  s->add_option("--from", o.from);
  s->add_option("--to", o.to);
  s->add_option("--points", o.points);
  s = leaf(metric, "distance", "distance between two meridian points", true, [&] {
    const WarpedMetric m = M();
    const DistanceInfo d = distance_info(m, point_of(m, o.p, "--p"), point_of(m, o.q, "--q"));
    return table("length,psi0,via_pole,closed_form",
                 {row(d.length, d.psi0, d.via_pole, d.closed_form)});
  });
  pt(s, "--p", o.p, true);
  pt(s, "--q", o.q, true);
  s = leaf(metric, "geodesic", "shoot a geodesic in the meridian plane", true, [&] {
    const WarpedMetric m = M();
    const Point p = point_of(m, o.p, "--p");
    Tangent v;
    v.dt = std::cos(o.psi);
    v.dtheta = Eigen::VectorXd::Zero(m.n());
    const double ang = o.p[1];
    v.dtheta(0) = -std::sin(ang);
    v.dtheta(1) = std::cos(ang);
    v.dtheta *= std::sin(o.psi) / m.phi(p.t);
    const GeodesicEnd g = geodesic_shoot(m, p, v, o.length);
    const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(m.n(), 0);
    return table("t,angle,dt,clairaut_start,clairaut_end",
                 {row(g.point.t, sphere_angle(e1, g.point.theta), g.tangent.dt, g.clairaut_start,
                      g.clairaut_end)});
  });
  pt(s, "--p", o.p, true);
  s->add_option("--psi", o.psi, "initial angle with d/dt");
  s->add_option("--length", o.length);

  // ---------------------------------------------------------------- volume
  CLI::App* volume = group("volume", "volumes, AVR, Bishop-Gromov, relative volume");
  s = leaf(volume, "ball", "pole-centred ball volumes", true, [&] {
    const WarpedMetric m = M();
    std::vector<std::string> rows;
    if (o.list.empty()) fail(Errc::InvalidInput, "--r expects a radius list");
    for (double r : o.list) rows.push_back(row(r, ball_volume(m, r)));
    return table("r,volume", rows);
  });
  s->add_option("--r", o.list, "radii")->delimiter(',');
  s = leaf(volume, "annulus", "Monte Carlo annulus volume", true, [&] {
    const WarpedMetric m = M();
    const McEstimate e =
        annulus_volume_mc(m, point_of(m, o.q, "--q"), o.r1, o.r2, o.samples, o.seed, o.jobs);
    return table("value,stderr,samples", {row(e.value, e.stderr_, e.samples)});
  });
  pt(s, "--q", o.q, true);
  s->add_option("--r1", o.r1);
  s->add_option("--r2", o.r2);
  s->add_option("--samples", o.samples);
  s = leaf(volume, "avr", "asymptotic volume ratio", true, [&] {
    const AvrResult a = avr(M());
    return table("avr,upper_bound_only", {row(a.value, a.upper_bound_only)});
  });
  s = leaf(volume, "bishop", "volume ratio monotonicity along a radius ladder", true, [&] {
    const WarpedMetric m = M();
    if (o.list.size() < 2) fail(Errc::InvalidInput, "--radii expects at least two radii");
    const BishopGromovReport b =
        bishop_gromov_check(m, point_of(m, o.q, "--q"), o.list, o.samples, o.seed, o.jobs);
    std::vector<std::string> rows;
    std::string worst;
    double inc = -kInf;
    for (size_t i = 0; i < b.radii.size(); ++i) {
      rows.push_back(row(b.radii[i], b.volume[i], b.volume_err[i], b.euclid[i], b.ratio[i],
                         b.ratio_err[i]));
      if (i > 0 && b.ratio[i] - b.ratio[i - 1] > inc) {
        inc = b.ratio[i] - b.ratio[i - 1];
        worst = rows.back();
      }
    }
    Outcome r = table("r,volume,volume_err,euclid,ratio,ratio_err", rows);
    if (!b.pass) r.failed = worst;
    return r;
  });
  pt(s, "--q", o.q, true);
  s->add_option("--radii", o.list, "increasing radii")->delimiter(',');
  s->add_option("--samples", o.samples);
  s = leaf(volume, "relative", "annulus ratio across a certified neck", true, [&] {
    const WarpedMetric m = M();
    const auto [t0, t1] = window();
    RelVolOptions ro;
    ro.samples = o.samples;
    ro.seed = o.seed;
    ro.jobs = o.jobs;
    const Point Q = o.q.empty() ? neck_base_point(m, t0, t1, o.Lb) : point_of(m, o.q, "--q");
    const RelVolReport r = relative_volume_report(m, t0, t1, Q, o.r1, o.r2, o.Lb, ro);
    return checked("R1,R2,r0,ratio,ratio_err,delta,L_b,eps_b,neck_eps,w0,w0_ok,sublemma_ok,pass",
                   row(r.R1, r.R2, r.r0, r.ratio, r.ratio_err, r.delta, r.L_b, r.eps_b,
                       r.neck_eps, r.w0, r.w0_ok, r.sublemma_ok, r.pass),
                   r.pass);
  });
  window_opt(s);
  pt(s, "--q", o.q, false);
  s->add_option("--r1", o.r1, "inner radius; <= 0 picks the constructive r0");
  s->add_option("--r2", o.r2, "outer radius; <= 0 means 2 r1");
  s->add_option("--Lb", o.Lb);
  s->add_option("--samples", o.samples);

  // ---------------------------------------------------------------- neck
  CLI::App* neck = group("neck", "neck certificates");
  s = leaf(neck, "normalize", "the z-parametrization of a window", true, [&] {
    const auto [t0, t1] = window();
    const NeckWindow w = normalize_parametrization(M(), t0, t1);
    if (o.points < 2) fail(Errc::InvalidInput, "--points >= 2");
    std::vector<std::string> rows;
    for (int i = 0; i < o.points; ++i) {
      const double z = w.a() + (w.b() - w.a()) * i / (o.points - 1);
      rows.push_back(row(z, w.t_of_z(z), w.r_of_z(z)));
    }
    return table("z,t,r", rows);
  });
  window_opt(s);
  s->add_option("--points", o.points);
  s = leaf(neck, "certify", "normalized neck certificate", true, [&] {
    const auto [t0, t1] = window();
    const WarpedMetric m = M();
    if (std::isnan(o.eps) && std::isnan(o.L))
      return table(neck_csv_header(), {neck_csv_row(certify_neck(m, t0, t1, o.k))});
    const NeckRequirement req{std::isnan(o.eps) ? kInf : o.eps, o.k, std::isnan(o.L) ? 0 : o.L};
    const NeckCertificate c = certify_neck(m, t0, t1, req);
    return checked(neck_csv_header(), neck_csv_row(c), c.pass);
  });
  window_opt(s);
  s->add_option("--k", o.k, "derivative order");
  s->add_option("--eps", o.eps, "required eps (exit 1 if not met)");
  s->add_option("--L", o.L, "required half-length (exit 1 if not met)");
  s = leaf(neck, "absolute", "absolute neck certificate", true, [&] {
    const auto [t0, t1] = window();
    const AbsoluteNeckCertificate c = certify_absolute_neck(M(), t0, t1, o.k);
    return table("a,b,k,L,r_mid,eps_metric,eps_abs",
                 {row(c.a, c.b, c.k, c.L, c.r_mid, c.eps_metric, c.eps_abs)});
  });
  window_opt(s);
  s->add_option("--k", o.k);
  s = leaf(neck, "epsprime", "normalized tolerance that implies an absolute one", false, [&] {
    if (std::isnan(o.eps) || std::isnan(o.L)) fail(Errc::InvalidInput, "need --eps and --L");
    return table("eps,k,L,n,eps_prime",
                 {row(o.eps, o.k, o.L, o.dim, epsilon_prime(o.eps, o.k, o.L, o.dim))});
  });
  s->add_option("--eps", o.eps);
  s->add_option("--k", o.k);
  s->add_option("--L", o.L);
  s->add_option("--n", o.dim);
  s = leaf(neck, "convert", "check the normalized-to-absolute conversion on a window", true, [&] {
    const auto [t0, t1] = window();
    const ConversionReport r =
        verify_absolute_conversion(M(), t0, t1, o.k, std::isnan(o.eps) ? 0 : o.eps);
    return checked("eps,eps_prime,neck_eps,eps_abs,applicable,margin,pass",
                   row(r.eps, r.eps_prime, r.neck.eps, r.absolute.eps_abs, r.applicable,
                       r.margin, r.pass),
                   r.pass);
  });
  window_opt(s);
  s->add_option("--k", o.k);
  s->add_option("--eps", o.eps, "absolute target; default the adversarial choice");

  // ---------------------------------------------------------------- ascr
  CLI::App* ascr = app.add_subcommand("ascr", "asymptotic scalar curvature ratio profile");
  add_metric_opts(ascr, o.metric);
  rgrid(ascr);
  ascr->fallthrough();
  actions[ascr] = [&] {
    Outcome r;
    r.body = ascr_csv(ascr_profile(M(), log_grid(o.rmin, o.rmax, o.per_decade)));
    return r;
  };

  // ---------------------------------------------------------------- busemann
  CLI::App* bus = group("busemann", "segment angles and Busemann functions");
  ThetaOptions topt;
  auto theta_opts = [&](CLI::App* s) {
    s->add_option("--segments", topt.segment_samples);
    s->add_option("--rays", topt.ray_samples);
    pt(s, "--q", o.q, true);
    rgrid(s);
  };
  s = leaf(bus, "theta", "theta(r) profile", true, [&] {
    const WarpedMetric m = M();
    topt.jobs = o.jobs;
    Outcome r;
    r.body = theta_csv(
        theta_profile(m, point_of(m, o.q, "--q"), log_grid(o.rmin, o.rmax, o.per_decade), topt));
    return r;
  });
  theta_opts(s);
  s = leaf(bus, "estimate", "two-sided Busemann bounds at a point", true, [&] {
    const WarpedMetric m = M();
    topt.jobs = o.jobs;
    const ThetaProfile p = theta_profile(m, point_of(m, o.q, "--q"),
                                         log_grid(o.rmin, o.rmax, o.per_decade), topt);
    const BusemannBounds b = busemann_estimate(m, p, point_of(m, o.x, "--x"), topt);
    return table("lower,upper,ray_lower,theta_lower",
                 {row(b.lower, b.upper, b.ray_lower, b.theta_lower)});
  });
  theta_opts(s);
  pt(s, "--x", o.x, true);
  s = leaf(bus, "contain", "level-set containments for a perturbed Busemann function", true, [&] {
    const WarpedMetric m = M();
    static const std::map<std::string, Perturbation> kinds = {
        {"zero", Perturbation::Zero},
        {"plus", Perturbation::PlusConstant},
        {"minus", Perturbation::MinusConstant},
        {"oscillating", Perturbation::Oscillating}};
    const ContainmentReport c = busemann_containment_check(
        m, point_of(m, o.q, "--q"), o.r, o.rho, o.eta2, kinds.at(o.perturbation), o.amplitude,
        o.directions);
    Outcome out;
    out.body = "clause,pass,checked,worst_margin\n";
    for (int i = 0; i < 4; ++i) {
      const std::string r = row(i + 1, c.clause[i].pass, c.clause[i].checked, c.clause[i].worst_margin);
      out.body += r + "\n";
      if (!c.clause[i].pass && out.failed.empty()) out.failed = r;
    }
    return out;
  });
  pt(s, "--q", o.q, true);
  s->add_option("--r", o.r);
  s->add_option("--rho", o.rho);
  s->add_option("--eta2", o.eta2);
  s->add_option("--perturbation", o.perturbation)
      ->check(CLI::IsMember({"zero", "plus", "minus", "oscillating"}));
  s->add_option("--amplitude", o.amplitude, "sup |p|; negative picks eta2 / 2");
  s->add_option("--directions", o.directions);

  // ---------------------------------------------------------------- gb
  CLI::App* gb = group("gb", "distance spheres and the Gauss-Bonnet integrand");
  auto rr = [&](CLI::App* s) {
    s->add_option("--r", o.r);
    s->add_option("--rho", o.rho);
  };
  s = leaf(gb, "surface", "the parallel distance sphere at r + rho", true, [&] {
    const ParallelSurface p = parallel_surface(M(), o.r, o.rho);
    return table("r,rho,t,phi,kappa,K_sph,K_rad,eps_K,n",
                 {row(p.r, p.rho, p.t, p.phi, p.kappa, p.K_sph, p.K_rad, p.eps_K, p.n)});
  });
  rr(s);
  s = leaf(gb, "weingarten", "principal curvature bounds", true, [&] {
    const WarpedMetric m = M();
    const double eK = std::isnan(o.epsK) ? parallel_surface(m, o.r, o.rho).eps_K : o.epsK;
    const WeingartenCheck w = weingarten_bound_check(m, o.r, o.rho, eK);
    return checked("kappa,lower,upper,lower_margin,upper_margin,pass",
                   row(w.kappa, w.lower, w.upper, w.lower_margin, w.upper_margin, w.pass), w.pass);
  });
  rr(s);
  s->add_option("--epsK", o.epsK, "curvature scale; default from the surface");
  s = leaf(gb, "integrand", "G, det L, Q and the total", true, [&] {
    const WarpedMetric m = M();
    const GBReport g = gauss_bonnet_integrand(m, parallel_surface(m, o.r, o.rho));
    return table("m,k_int,G,detL,Q,area,total",
                 {row(g.m, g.k_int, g.G, g.detL, g.Q, g.area, g.total)});
  });
  rr(s);
  s = leaf(gb, "q", "the |G - det L| bound", true, [&] {
    const QBoundCheck q = q_bound_check(M(), o.r, o.rho, o.eta2, o.cn);
    return checked("Q,bound,a,rho_max,fitted_c,pass",
                   row(q.Q, q.bound, q.a, q.rho_max, q.fitted_c, q.pass), q.pass);
  });
  rr(s);
  s->add_option("--eta2", o.eta2);
  s->add_option("--cn", o.cn, "c(n); <= 0 selects the module default");
  s = leaf(gb, "area", "area lower bound over a rho list", true, [&] {
    const WarpedMetric m = M();
    const std::vector<double> rhos = o.list.empty() ? std::vector<double>{o.rho} : o.list;
    Outcome out;
    out.body = area_csv_header() + "\n";
    for (double rho : rhos) {
      const AreaBoundCheck a = area_lower_bound_check(m, o.r, rho, o.eta2, o.cn);
      out.body += area_csv_row(a) + "\n";
      if (!a.pass && out.failed.empty()) out.failed = area_csv_row(a);
    }
    return out;
  });
  rr(s);
  s->add_option("--rhos", o.list, "rho sweep")->delimiter(',');
  s->add_option("--eta2", o.eta2);
  s->add_option("--cn", o.cn);

  // ---------------------------------------------------------------- pinch
  CLI::App* pinch = group("pinch", "curvature operator pinching algebra");
  auto eopt = [&](CLI::App* s, bool required) {
    s->add_option("--e", o.e, required ? "lambda,mu,nu (required)" : "lambda,mu,nu")
        ->delimiter(',')
        ->expected(3);
  };
  auto gje = [&](CLI::App* s) {
    eopt(s, true);
    s->add_option("--t", o.t, "time, < 0");
    s->add_option("--gamma", o.gamma);
    s->add_option("--eps", o.eps);
  };
  s = leaf(pinch, "p", "the P quantity", false, [&] {
    const EigenTriple e = triple_of(o.e);
    return table("lambda,mu,nu,P", {row(e.lambda, e.mu, e.nu, p_quantity(e))});
  });
  eopt(s, true);
  s = leaf(pinch, "necklike", "smallest necklike delta", false, [&] {
    const EigenTriple e = triple_of(o.e);
    return table("lambda,mu,nu,delta_star", {row(e.lambda, e.mu, e.nu, necklike_delta(e))});
  });
  eopt(s, true);
  s = leaf(pinch, "sample", "P lower bound on one triple or a random sweep", false, [&] {
    if (o.e.empty()) return pinch_sweep(o);
    const EigenTriple e = triple_of(o.e);
    const double d = std::isnan(o.delta) ? max_admissible_delta(e) : o.delta;
    const LemmaCResult l = lemma_c_check(e, d);
    return checked("lambda,mu,nu,delta,status,hyp_lhs,hyp_rhs,P,rhs,ratio",
                   row(e.lambda, e.mu, e.nu, d, status_name(l.status), l.hyp_lhs, l.hyp_rhs, l.P,
                       l.rhs, l.ratio),
                   l.status != LemmaStatus::Fail);
  });
  eopt(s, false);
  s->add_option("--delta", o.delta, "default: the largest admissible");
  s->add_option("--n", o.n_samples, "random triples (sweep mode)");
  s = leaf(pinch, "g", "the G quantity", false, [&] {
    return table("G", {row(g_quantity(triple_of(o.e), o.t, o.gamma, std::isnan(o.eps) ? 0.01 : o.eps))});
  });
  gje(s);
  s = leaf(pinch, "j", "the J quantity", false, [&] {
    return table("J", {row(j_quantity(triple_of(o.e), o.t, o.gamma, std::isnan(o.eps) ? 0.01 : o.eps))});
  });
  gje(s);
  s = leaf(pinch, "dichotomy", "classify and check the J bound", false, [&] {
    const double d = std::isnan(o.delta) ? 0.5 : o.delta;
    const DichotomyResult r = dichotomy_check(triple_of(o.e), o.t, o.c, d, o.gamma,
                                              std::isnan(o.eps) ? pinching_eta(d) : o.eps);
    return checked("class,G,J,bound,margin,pass",
                   row(std::string(alternative_name(r.alt)), r.G, r.J, r.bound, r.margin, r.pass),
                   r.pass);
  });
  gje(s);
  s->add_option("--c", o.c);
  s->add_option("--delta", o.delta);
  s = leaf(pinch, "ode", "integrate the curvature reaction ODE", false, [&] {
    OdeOptions oo;
    oo.rtol = o.rtol;
    const Trajectory tr = integrate_curvature_ode(triple_of(o.e), o.t0, o.t1, oo);
    std::vector<std::string> rows;
    for (const OdeSample& s : tr.samples) rows.push_back(trajectory_csv_row(s));
    return table(trajectory_csv_header(), rows);
  });
  eopt(s, true);
  s->add_option("--t0", o.t0);
  s->add_option("--t1", o.t1);
  s->add_option("--rtol", o.rtol);

  // ---------------------------------------------------------------- flow
  CLI::App* flow = group("flow", "rotationally symmetric Ricci flow");
  auto write_snapshots = [&](const RunHistory& h) {
    if (o.dir.empty()) return;
    std::filesystem::create_directories(o.dir);
    for (size_t i = 0; i < h.snapshots.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "snap_%05zu", i);
      std::ofstream(o.dir + "/" + name + ".csv") << snapshot_csv(h.snapshots[i]);
      std::ofstream(o.dir + "/" + name + ".manifest") << snapshot_manifest(h.snapshots[i]);
    }
  };
  auto run = [&](bool print_reason) {
    const RunHistory h = run_flow(init_from_config(o.flow), o.flow);
    if (print_reason) err << "stop: " << h.stop_reason << " after " << h.steps << " steps\n";
    write_snapshots(h);
    return h;
  };
  s = leaf(flow, "init", "initial profile", false, [&] {
    Outcome r;
    r.body = snapshot_csv(init_from_config(o.flow));
    return r;
  });
  add_flow_opts(s, o.flow);
  s = leaf(flow, "run", "run to a stop condition; one row per snapshot", false, [&] {
    const RunHistory h = run(true);
    std::vector<std::string> rows;
    for (const FlowState& st : h.snapshots) rows.push_back(diag_row(st));
    return table(diag_header(), rows);
  });
  add_flow_opts(s, o.flow);
  s->add_option("--dir", o.dir, "write snap_NNNNN.csv and .manifest here");
  s = leaf(flow, "rescale", "parabolic rescaling at a stored snapshot", false, [&] {
    if (std::isnan(o.base_s) || std::isnan(o.base_t)) fail(Errc::InvalidInput, "need --s and --t");
    const RunHistory h = run(false);
    Outcome r;
    r.body = snapshot_csv(rescale_at(h, o.base_s, o.base_t).state);
    return r;
  });
  add_flow_opts(s, o.flow);
  s->add_option("--s", o.base_s, "grid coordinate of the base point");
  s->add_option("--t", o.base_t, "a stored snapshot time");
  s = leaf(flow, "neck", "neck eps at the center over the snapshots", false, [&] {
    const RunHistory h = run(true);
    std::vector<std::string> rows;
    for (const NeckSample& n : track_neck(h, o.k, std::isnan(o.L) ? 10 : o.L, o.eps_target, o.cadence))
      rows.push_back(neck_series_row(n));
    return table(neck_series_header(), rows);
  });
  add_flow_opts(s, o.flow);
  s->add_option("--k", o.k);
  s->add_option("--L", o.L, "window half-length (default 10)");
  s->add_option("--eps_target", o.eps_target);
  s->add_option("--cadence", o.cadence);
  s->add_option("--dir", o.dir);

  // ---------------------------------------------------------------- chain
  CLI::App* chain = group("chain", "constants of the ASCR lower bound");
  s = leaf(chain, "delta", "relative-volume bound delta(L_b)", false, [&] {
    return table("n,L_b,delta", {row(o.dim, o.Lb, delta_of_Lb(o.dim, o.Lb))});
  });
  s->add_option("--n", o.dim);
  s->add_option("--Lb", o.Lb);
  s = leaf(chain, "bound", "ASCR lower bound C0 from L0", false, [&] {
    const double cn = o.cn > 0 ? o.cn : gauss_bonnet_constant(o.dim);
    return table("n,L0,c_n,eta1,C0",
                 {row(o.dim, o.L0, cn, o.eta1, ascr_lower_bound(o.dim, o.L0, cn, o.eta1))});
  });
  s->add_option("--n", o.dim);
  s->add_option("--L0", o.L0);
  s->add_option("--cn", o.cn);
  s->add_option("--eta1", o.eta1);
  s = leaf(chain, "constants", "(eps0, k0, L0) for a requested C0, as TOML", false, [&] {
    Outcome r;
    r.csv = false;
    r.body = chain_toml(constants_for(o.dim, o.C0, o.chain));
    return r;
  });
  s->add_option("--n", o.dim);
  s->add_option("--C0", o.C0);
  s->add_option("--cn", o.chain.c_n);
  s->add_option("--eps_a", o.chain.eps_a);
  s->add_option("--k_a", o.chain.k_a);
  s->add_option("--L_a", o.chain.L_a);
  s->add_option("--eta1", o.chain.eta1);
  s->add_option("--eta2", o.chain.eta2);

  // ---------------------------------------------------------------- suite
  CLI::App* suite = app.add_subcommand("suite", "acceptance battery (exit 1 on any FAIL)");
  suite->add_option("name", o.suite, "quick | full")->check(CLI::IsMember({"quick", "full"}));
  suite->fallthrough();
  actions[suite] = [&] {
    SuiteOptions so;
    so.seed = o.seed;
    so.jobs = o.jobs;
    std::vector<CriterionResult> rs;
    std::string failed;
    for (int id : suite_criteria(o.suite)) {
      rs.push_back(run_criterion(id, so));
      err << criterion_line(rs.back()) << "\n";
      if (!rs.back().pass && failed.empty()) failed = criterion_line(rs.back());
    }
    Outcome r;
    r.body = suite_summary_csv(rs);
    r.failed = failed;
    return r;
  };

  // ---------------------------------------------------------------- dispatch
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    CLI::App* sel = selected_leaf(&app);
    if (!o.config.empty()) apply_config(sel, o.config);
    const auto it = actions.find(sel);
    if (it == actions.end()) fail(Errc::InvalidInput, "no command selected");
    const Outcome r = it->second();
    if (o.out.empty()) {
      out << r.body;
    } else {
      std::ofstream f(o.out);
      if (!(f << r.body)) fail(Errc::InvalidInput, "cannot write " + o.out);
    }
    if (!o.svg.empty()) {
      if (!r.csv) fail(Errc::InvalidInput, "this command does not emit CSV; no plot");
      std::ofstream f(o.svg);
      std::string title;
      for (CLI::App* a = sel; a != &app; a = a->get_parent())
        title = a->get_name() + (title.empty() ? "" : " ") + title;
      if (!(f << svg_from_csv(r.body, title))) fail(Errc::InvalidInput, "cannot write " + o.svg);
    }
    if (!r.failed.empty()) {
      err << "verification failed: " << r.failed << "\n";
      return 1;
    }
    return 0;
  } catch (const Error& e) {
    err << e.what() << "\n";  // what() leads with the errc name
    return 2;
  }
}

// ---------------------------------------------------------------- svg

std::string svg_from_csv(const std::string& csv, const std::string& title) {
  std::istringstream in(csv);
  std::string line;
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  auto split = [](const std::string& l) {
    std::vector<std::string> v;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) v.push_back(c);
    if (!l.empty() && l.back() == ',') v.emplace_back();
    return v;
  };
  if (!std::getline(in, line)) fail(Errc::InvalidInput, "empty CSV");
  names = split(line);
  cols.assign(names.size(), {});
  std::vector<bool> numeric(names.size(), true);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    cells.resize(names.size());
    for (size_t j = 0; j < names.size(); ++j) {
      double v = NAN;
      if (!cells[j].empty()) {
        char* end = nullptr;
        v = std::strtod(cells[j].c_str(), &end);
        if (*end) numeric[j] = false;
      }
      cols[j].push_back(v);
    }
  }
  const size_t rows = cols.empty() ? 0 : cols[0].size();
  if (names.size() < 2 || rows < 2 || !numeric[0])
    fail(Errc::InvalidInput, "plot needs a numeric first column and at least two rows");

  auto range = [](const std::vector<double>& v, bool& logok) {
    double lo = kInf, hi = -kInf;
    for (double x : v)
      if (std::isfinite(x)) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    logok = lo > 0 && hi / lo >= 1e3;
    return std::pair{lo, hi};
  };
  bool logx = false, logy = true;
  auto [x0, x1] = range(cols[0], logx);
  double y0 = kInf, y1 = -kInf;
  for (size_t j = 1; j < names.size(); ++j) {
    if (!numeric[j]) continue;
    bool l = false;
    const auto [a, b] = range(cols[j], l);
    if (!(a <= b)) continue;
    y0 = std::min(y0, a);
    y1 = std::max(y1, b);
  }
  if (!(y0 <= y1)) fail(Errc::InvalidInput, "plot: no finite values");
  logy = y0 > 0 && y1 / y0 >= 1e3;
  auto tx = [&](double v) { return logx ? std::log10(v) : v; };
  auto ty = [&](double v) { return logy ? std::log10(v) : v; };
  double X0 = tx(x0), X1 = tx(x1), Y0 = ty(y0), Y1 = ty(y1);
  if (X1 == X0) X1 = X0 + 1;
  if (Y1 == Y0) {
    Y0 -= 0.5;
    Y1 += 0.5;
  }
  constexpr double W = 720, H = 440, ml = 80, mr = 160, mt = 40, mb = 50;
  auto px = [&](double v) { return ml + (tx(v) - X0) / (X1 - X0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - Y0) / (Y1 - Y0) * (H - mt - mb); };
  auto esc = [](const std::string& s) {
    std::string r;
    for (char c : s) {
      if (c == '<') r += "&lt;";
      else if (c == '>') r += "&gt;";
      else if (c == '&') r += "&amp;";
      else r += c;
    }
    return r;
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                 "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  char b[256];
  std::string s;
  std::snprintf(b, sizeof b,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                W, H);
  s += b;
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"24\" font-size=\"14\">", ml);
  s += b + esc(title) + "</text>\n";
  std::snprintf(b, sizeof b,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n",
                ml, mt, W - ml - mr, H - mt - mb);
  s += b;
  // Axis labels at the ends of each range.
  auto lab = [&](double v) { return num(v).substr(0, 10); };
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"%g\">%s</text>\n", ml, H - mb + 16, lab(x0).c_str());
  s += b;
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s</text>\n", W - mr,
                H - mb + 16, lab(x1).c_str());
  s += b;
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s</text>\n", ml - 4,
                H - mb, lab(y0).c_str());
  s += b;
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s</text>\n", ml - 4,
                mt + 10, lab(y1).c_str());
  s += b;
  std::snprintf(b, sizeof b, "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s%s</text>\n",
                (ml + W - mr) / 2, H - 12, esc(names[0]).c_str(), logx ? " (log)" : "");
  s += b;
  if (logy) {
    std::snprintf(b, sizeof b, "<text x=\"8\" y=\"%g\">(log)</text>\n", H / 2);
    s += b;
  }
  int series = 0;
  for (size_t j = 1; j < names.size(); ++j) {
    if (!numeric[j]) continue;
    const char* col = colors[series % 8];
    std::string pts;
    auto flush = [&] {
      if (pts.empty()) return;
      s += "<polyline fill=\"none\" stroke=\"" + std::string(col) + "\" points=\"" + pts + "\"/>\n";
      pts.clear();
    };
    for (size_t i = 0; i < rows; ++i) {
      const double x = cols[0][i], y = cols[j][i];
      if (!std::isfinite(x) || !std::isfinite(y) || (logx && x <= 0) || (logy && y <= 0)) {
        flush();
        continue;
      }
      std::snprintf(b, sizeof b, "%.2f,%.2f ", px(x), py(y));
      pts += b;
    }
    flush();
    std::snprintf(b, sizeof b,
                  "<text x=\"%g\" y=\"%g\" fill=\"%s\">%s</text>\n", W - mr + 10,
                  mt + 14 + 16.0 * series, col, esc(names[j]).c_str());
    s += b;
    ++series;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace neckscope
