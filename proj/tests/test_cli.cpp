#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "neckscope/cli.hpp"
#include "neckscope/neck_analysis.hpp"
#include "test_main.hpp"

using namespace neckscope;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int c = run_cli(args, o, e);
  return {c, o.str(), e.str()};
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> w;
  for (std::string x; in >> x;) w.push_back(x);
  return w;
}

std::vector<std::string> lines(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> v;
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::string tmp(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("neckscope_cli_" + name)).string();
}

}  // namespace

TEST_CASE("every library operation maps to exactly one command") {
  const std::map<std::string, std::vector<std::string>> ops = {
      {"warped_geometry",
       {"make_metric", "curvature_at", "distance", "geodesic_shoot", "ball_volume",
        "annulus_volume_mc"}},
      {"neck_analysis",
       {"normalize_parametrization", "certify_neck", "certify_absolute_neck", "epsilon_prime",
        "verify_absolute_conversion"}},
      {"asymptotic_invariants",
       {"ascr_profile", "avr", "theta_profile", "busemann_estimate", "busemann_containment_check",
        "bishop_gromov_check", "relative_volume_report"}},
      {"hypersurface_gauss_bonnet",
       {"parallel_surface", "weingarten_bound_check", "gauss_bonnet_integrand", "q_bound_check",
        "area_lower_bound_check"}},
      {"curvature_pinching",
       {"p_quantity", "necklike_delta", "lemma_c_check", "g_quantity", "j_quantity",
        "dichotomy_check", "integrate_curvature_ode"}},
      {"ricci_flow_sim", {"init_flow", "step", "rescale_at", "track_neck"}},
      {"constant_chain", {"delta_of_Lb", "ascr_lower_bound", "constants_for"}},
      {"cli", {"suite"}},
  };
  size_t expected = 0;
  for (const auto& [mod, names] : ops)
    for (const auto& op : names) {
      ++expected;
      int hits = 0;
      for (const CommandBinding& b : command_registry())
        if (b.module == mod && b.op == op) ++hits;
      CHECK_MESSAGE(hits == 1, mod << "::" << op);
    }
  CHECK(command_registry().size() == expected);

  std::set<std::string> commands;
  for (const CommandBinding& b : command_registry()) {
    CHECK_MESSAGE(commands.insert(b.command).second, b.command);
    std::vector<std::string> a = words(b.command);
    a.push_back("--help");
    const Run r = cli(a);
    CHECK_MESSAGE(r.code == 0, b.command);
  }
  // Top-level commands.
  std::set<std::string> top;
  for (const auto& c : commands) top.insert(words(c)[0]);
  CHECK(top == std::set<std::string>{"metric", "neck", "ascr", "busemann", "volume", "gb", "pinch",
                                     "flow", "chain", "suite"});
}

TEST_CASE("neck certify on a flare window") {
  const Run r = cli(words("neck certify --preset flare --sigma 0.05 --k 2 --window 10,90"));
  CHECK(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 2);
  CHECK(l[0] == neck_csv_header());
  const NeckCertificate c = certify_neck(make_metric(flare_spec(0.05)), 10, 90, 2);
  CHECK(l[1] == neck_csv_row(c));
  // d log r / dz = phi' = sigma + (1 - sigma) e^-t, largest at the left end.
  const double slope = 0.05 + 0.95 * std::exp(-10.0);
  CHECK(c.eps_by_order.at(0) == doctest::Approx(slope).epsilon(1e-9));
  CHECK(c.eps >= c.eps_by_order.at(0));

  // A requirement the window cannot meet is a verification failure.
  const Run f =
      cli(words("neck certify --preset flare --sigma 0.05 --k 2 --window 10,90 --eps 1e-6"));
  CHECK(f.code == 1);
  CHECK(f.err.find("verification failed") != std::string::npos);
}

TEST_CASE("pinch sample sweep") {
  const Run r = cli(words("pinch sample --n 1000000 --seed 7"));
  CHECK(r.code == 0);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 2);
  CHECK(l[0] == "samples,seed,checked,violations,min_ratio");
  CHECK(l[1].rfind("1000000,7,", 0) == 0);
  CHECK(l[1].find(",0,") != std::string::npos);

  // Independent of the worker count.
  CHECK(cli(words("--jobs 1 pinch sample --n 200000 --seed 3")).out ==
        cli(words("--jobs 3 pinch sample --n 200000 --seed 3")).out);
  CHECK(cli(words("pinch sample --n 200000 --seed 3")).out !=
        cli(words("pinch sample --n 200000 --seed 4")).out);

  // Hand case: (1,1,0) has P = 2 against 1/144 at delta = 1.
  const Run h = cli(words("pinch sample --e 1,1,0 --delta 1"));
  CHECK(h.code == 0);
  CHECK(h.out.find(",pass,") != std::string::npos);
}

TEST_CASE("errors map to exit 2") {
  const Run a = cli(words("ascr --preset sphere --a 1"));
  CHECK(a.code == 2);
  CHECK(a.err.find("RequiresNoncompact") != std::string::npos);

  const Run u = cli(words("neck certify --window 10,90 --bogus 3"));
  CHECK(u.code == 2);
  CHECK(u.err.find("Usage") != std::string::npos);

  CHECK(cli(words("frobnicate")).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli(words("neck")).code == 2);
  CHECK(cli(words("neck certify --preset torus --window 1,2")).code == 2);
  CHECK(cli(words("--help")).code == 0);
  // Library preconditions surface with their names.
  const Run w = cli(words("neck certify --preset flare --window 5,2"));
  CHECK(w.code == 2);
  CHECK(w.err.find("Invalid") != std::string::npos);
}

TEST_CASE("closed-form outputs") {
  // Flat ball volume 4 pi r^3 / 3.
  const Run b = cli(words("volume ball --preset flat --r 1,2"));
  REQUIRE(b.code == 0);
  const auto l = lines(b.out);
  REQUIRE(l.size() == 3);
  double r = 0, v = 0;
  REQUIRE(std::sscanf(l[2].c_str(), "%lf,%lf", &r, &v) == 2);
  CHECK(v == doctest::Approx(4 * M_PI * 8 / 3).epsilon(1e-9));

  const Run p = cli(words("pinch p --e 1,1,0"));
  CHECK(lines(p.out).at(1) == "1,1,0,2");

  const Run c = cli(words("chain constants --C0 100"));
  CHECK(c.code == 0);
  CHECK(c.out.rfind("[chain]", 0) == 0);
  // TOML output has no plot.
  CHECK(cli({"--svg", tmp("x.svg"), "chain", "constants"}).code == 2);

  const Run d = cli(words("chain delta --Lb 16"));
  CHECK(d.out.find("3,16,0.0212") != std::string::npos);
}

TEST_CASE("config file and flag precedence") {
  const std::string cfg = tmp("cfg.txt");
  std::ofstream(cfg) << "# flare window\npreset = flare\nsigma=0.05\nk = 3\nwindow = 10,90\n";
  const Run a = cli({"neck", "certify", "--config", cfg});
  REQUIRE(a.code == 0);
  CHECK(lines(a.out).at(1) ==
        neck_csv_row(certify_neck(make_metric(flare_spec(0.05)), 10, 90, 3)));
  const Run b = cli({"--config", cfg, "neck", "certify", "--k", "1"});
  REQUIRE(b.code == 0);
  CHECK(lines(b.out).at(1) ==
        neck_csv_row(certify_neck(make_metric(flare_spec(0.05)), 10, 90, 1)));
  std::ofstream(cfg) << "nonsense = 1\n";
  const Run c = cli({"neck", "certify", "--window", "1,2", "--config", cfg});
  CHECK(c.code == 2);
  CHECK(c.err.find("unknown key") != std::string::npos);
}

TEST_CASE("output files and plots") {
  const std::string csv = tmp("curv.csv"), svg = tmp("curv.svg");
  const Run r = cli({"--out", csv, "--svg", svg, "metric", "curvature", "--preset", "sphere",
                     "--from", "0.1", "--to", "3", "--points", "20"});
  REQUIRE(r.code == 0);
  CHECK(r.out.empty());
  std::ifstream fc(csv), fs(svg);
  std::stringstream c, s;
  c << fc.rdbuf();
  s << fs.rdbuf();
  CHECK(lines(c.str()).size() == 21);
  CHECK(s.str() == svg_from_csv(c.str(), "metric curvature"));
  // One polyline per numeric column after the first.
  size_t polylines = 0;
  for (size_t p = 0; (p = s.str().find("<polyline", p)) != std::string::npos; ++p) ++polylines;
  CHECK(polylines == 4);

  CHECK(svg_from_csv("x,y\n1,2\n2,4\n", "") == svg_from_csv("x,y\n1,2\n2,4\n", ""));
  CHECK_THROWS_AS(svg_from_csv("x,y\n1,2\n", ""), Error);
}

TEST_CASE("seeded Monte Carlo output is reproducible") {
  const std::string cmd = "volume annulus --preset flare --sigma 0.3 --q 5,0 --r1 1 --r2 2 "
                          "--samples 20000 --seed 11";
  const Run a = cli(words(cmd)), b = cli(words(cmd));
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("flow commands") {
  const Run i = cli(words("flow init --profile round --grid 128"));
  REQUIRE(i.code == 0);
  CHECK(lines(i.out).size() == 129);
  const Run r = cli(words("flow run --profile round --grid 128 --stop_time 0.05"));
  REQUIRE(r.code == 0);
  CHECK(r.err.find("stop:") != std::string::npos);
  const auto l = lines(r.out);
  REQUIRE(l.size() >= 2);
  CHECK(l[0] == "t,R_max,R_min,phi_min,K_sup,pole_regularity,neck_index");
  // R of the round sphere of radius a is 6 / a^2 with a^2 = 1 - 4t.
  double t = 0, rmax = 0;
  REQUIRE(std::sscanf(l.back().c_str(), "%lf,%lf", &t, &rmax) == 2);
  CHECK(rmax == doctest::Approx(6 / (1 - 4 * t)).epsilon(1e-3));
  CHECK(cli(words("flow rescale --profile round --grid 128 --stop_time 0.01 --s 1 --t 0.0037"))
            .code == 2);
}

TEST_CASE("suite quick is byte-identical across runs") {
  const Run a = cli(words("suite quick --seed 7")), b = cli(words("suite quick --seed 7"));
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(lines(a.out).size() == 7);
  CHECK(lines(a.out).at(0) == "id,name,status,margin,detail");
  CHECK(cli(words("suite nightly")).code == 2);
}
