#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace neckscope {

// Curvature operator eigenvalues of a 3-manifold, sorted by |.| descending.
// Scalar curvature convention: R = lambda + mu + nu.
struct EigenTriple {
  double lambda = 0, mu = 0, nu = 0;

  EigenTriple() = default;
  EigenTriple(double a, double b, double c);

  double R() const { return lambda + mu + nu; }
  double norm2() const { return lambda * lambda + mu * mu + nu * nu; }
  double norm() const;
  // |Rm°|^2 from pairwise differences, so it vanishes exactly at round points.
  double traceless2() const;
  double largest() const;
  double smallest() const;
  bool nonnegative() const { return nu >= 0 && mu >= 0 && lambda >= 0; }
  EigenTriple scaled(double s) const { return {s * lambda, s * mu, s * nu}; }
};

double p_quantity(const EigenTriple& e);

// Smallest delta for which the point is delta-necklike.
double necklike_delta(const EigenTriple& e);

// 2(mu^2 + nu^2 + mu nu) / |Rm|^2, capped at 1: the largest delta for which
// the hypothesis of the P lower bound holds.
double max_admissible_delta(const EigenTriple& e);

// delta / (96 (3 - delta)).
double pinching_eta(double delta);

enum class LemmaStatus { Pass, Fail, NotApplicable };

struct LemmaCResult {
  LemmaStatus status = LemmaStatus::NotApplicable;
  double delta = 0;
  double hyp_lhs = 0, hyp_rhs = 0;  // mu^2+nu^2+mu nu  vs  delta/2 |Rm|^2
  double P = 0, rhs = 0;            // P  vs  eta |Rm|^2 |Rm°|^2
  double ratio = 0;                 // P / rhs (inf when rhs = 0 < P)
};

// delta in (0,1].
LemmaCResult lemma_c_check(const EigenTriple& e, double delta);

double g_quantity(const EigenTriple& e, double t, double gamma, double eps);
double j_quantity(const EigenTriple& e, double t, double gamma, double eps);

struct PinchReport {
  double P = 0, delta_star = 0, G = 0, J = 0;
  double t = 0, gamma = 0, eps = 0, c = 0, delta = 0;
};

PinchReport pinch_report(const EigenTriple& e, double t, double gamma, double eps, double c,
                         double delta);

enum class Alternative { NotEssential, NotNecklike, NotClassified };
std::string_view alternative_name(Alternative a);

// Which alternative holds; no parameter checks, does not throw.
Alternative classify(const EigenTriple& e, double t, double c, double delta);

struct DichotomyResult {
  Alternative alt = Alternative::NotClassified;
  double G = 0, J = 0;
  double bound = 0;   // -gamma eps/(8|t|) G or -gamma eps/(4|t|) G
  double margin = 0;  // bound - J
  bool pass = false;
};

// eta <= 0 selects pinching_eta(delta). Throws NotClassified for points that
// are both essential and delta-necklike.
DichotomyResult dichotomy_check(const EigenTriple& e, double t, double c, double delta,
                                double gamma, double eps, double eta = 0);

struct OdeOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double blowup = 1e12;  // |Rm| threshold
  double h0 = 0;         // initial step; 0 picks one from the data
  double hmax = 0;       // step cap; 0 for none
  // Diagnostics along the trajectory.
  double gamma = 1, eps = 0.01, c = 0.125, delta = 0.5;
};

struct OdeSample {
  double t = 0;
  EigenTriple e;
  double G = 0, J = 0;  // NaN where t >= 0 or R <= 0
  double dGdt = 0;      // exact reaction derivative
  Alternative alt = Alternative::NotClassified;
  bool classified = false;  // t < 0 and R > 0
};

struct Trajectory {
  std::vector<OdeSample> samples;
  bool blew_up = false;
  double blowup_time = 0;  // estimate when blew_up
  bool stayed_nonnegative = true;
};

// lambda' = lambda^2 + mu nu and cyclic, from (t0, e0) to t1 > t0.
Trajectory integrate_curvature_ode(const EigenTriple& e0, double t0, double t1,
                                   const OdeOptions& opt = {});

// dG/dt along the reaction ODE; equals 2J minus a nonnegative term.
double g_reaction_derivative(const EigenTriple& e, double t, double gamma, double eps);

std::string trajectory_csv_header();
std::string trajectory_csv_row(const OdeSample& s);

}  // namespace neckscope
