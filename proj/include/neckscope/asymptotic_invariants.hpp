#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neckscope/warped_geometry.hpp"

namespace neckscope {

// ---------------------------------------------------------------- ASCR

struct AscrOptions {
  // Samples of R d^2 are taken up to this distance from the origin slice;
  // 0 picks max(1e3 * max(r-grid), 1e4 * scale), or the truncation end.
  double d_cap = 0;
  int samples_per_decade = 48;
  double divergence_ratio = 10;
};

struct AscrProfile {
  std::vector<double> r;
  std::vector<double> a2;     // a(r)^2, +inf when diverging
  std::vector<double> kappa;  // sup of R beyond distance r
  std::vector<double> rho;    // pi r / (4 a(r))
  bool diverging = false;
  double ascr_estimate = 0;  // +inf when diverging
  // Diagnostics.
  double tail_limit = 0;   // A of R d^2 ~ A + B/d on the last sampled decade
  double fit_A = 0, fit_B = 0;
  double first_decade_sup = 0, last_decade_sup = 0;
  double d_cap = 0;
};

// Distances are measured from the slice t = t_min (the pole when present).
AscrProfile ascr_profile(const WarpedMetric& m, const std::vector<double>& r_grid,
                         const AscrOptions& opt = {});
std::string ascr_csv(const AscrProfile& p);

// ---------------------------------------------------------------- AVR

struct AvrResult {
  double value = 0;
  // Without a pole the value is the limit of slab volume / r^n, an upper bound.
  bool upper_bound_only = false;
  std::vector<double> radii, ratios;
};

AvrResult avr(const WarpedMetric& m);

// ---------------------------------------------------------------- theta(r), Busemann

struct ThetaOptions {
  int segment_samples = 64;  // direction intervals for segments
  int ray_samples = 128;     // direction intervals for rays, a multiple of segment_samples
  double ray_length = 1e3;   // in units of the metric scale
  int max_doublings = 1;
  double tolerance = 0.05;  // relative change that stops the doubling
  int jobs = 0;
};

struct ThetaProfile {
  Point Q;
  std::vector<double> r;
  std::vector<double> theta;      // radians
  std::vector<double> theta_err;  // change under the last grid doubling
  std::vector<double> ray_psi;    // initial angles with d/dt of sampled rays
  std::vector<double> segment_psi, segment_cut;
  int excluded = 0, directions = 0;
  bool q_at_pole = false;
};

ThetaProfile theta_profile(const WarpedMetric& m, const Point& Q, const std::vector<double>& r,
                           const ThetaOptions& opt = {});
std::string theta_csv(const ThetaProfile& p);
// theta at distance d: the value at the largest grid radius <= d (pi below the grid).
double theta_at(const ThetaProfile& p, double d);

struct BusemannBounds {
  double lower = 0;
  double upper = 0;      // d(x, Q)
  double ray_lower = 0;  // max over sampled rays of L - d(gamma(L), x)
  double theta_lower = 0;
};

BusemannBounds busemann_estimate(const WarpedMetric& m, const ThetaProfile& profile,
                                 const Point& x, const ThetaOptions& opt = {});

struct BusemannReport {
  Point Q;
  ThetaProfile theta;
  std::vector<Point> points;
  std::vector<BusemannBounds> bounds;
  double eta2 = 0;
};

BusemannReport busemann_report(const WarpedMetric& m, const Point& Q, const std::vector<double>& r,
                               const std::vector<Point>& xs, double eta2 = 0.5,
                               const ThetaOptions& opt = {});

enum class Perturbation { Zero, PlusConstant, MinusConstant, Oscillating };

struct ContainmentClause {
  bool pass = true;
  int checked = 0;
  double worst_margin = 0;  // smallest slack over the checked points
};

struct ContainmentReport {
  ContainmentClause clause[4];
  double eta = 0;  // radius of the ball containing the sampled level set
  bool pass() const {
    return clause[0].pass && clause[1].pass && clause[2].pass && clause[3].pass;
  }
};

// Checks the four level-set containments for bhat = b + p with sup|p| = amplitude < eta2.
// b is the exact Busemann function when Q is a pole or the metric is flat, and the
// ray-sampled lower estimate otherwise.
ContainmentReport busemann_containment_check(const WarpedMetric& m, const Point& Q, double r,
                                             double rho, double eta2,
                                             Perturbation kind = Perturbation::Oscillating,
                                             double amplitude = -1, int directions = 48);

// ---------------------------------------------------------------- volume comparison

struct BishopGromovReport {
  std::vector<double> radii;
  std::vector<double> volume, volume_err, euclid, ratio, ratio_err;
  bool exact = false;
  bool pass = true;
  double worst_excess = 0;  // max over i of (ratio[i+1] - ratio[i]) / combined 3-sigma
};

BishopGromovReport bishop_gromov_check(const WarpedMetric& m, const Point& Q,
                                       const std::vector<double>& radii, long samples = 100000,
                                       std::uint64_t seed = 7, int jobs = 0);

struct RelVolOptions {
  long samples = 100000;
  std::uint64_t seed = 7;
  int jobs = 0;
  double r0_margin = 10;
  // Schoenflies placeholders, not from the source.
  double eps_a = 0.1;
  int k_a = 2;
  double L_a = 16;
  int w0_directions = 32;
};

struct RelVolReport {
  Point Q;
  double R1 = 0, R2 = 0, r0 = 0;
  double ratio = 0, ratio_err = 0;
  double delta = 0;
  double L_b = 0;
  double eps_b = 0;
  double neck_eps = 0;
  double w0 = 0;  // smallest center-sphere crossing parameter over sampled geodesics
  bool w0_ok = false;
  double sublemma_max_distance = 0;
  int sublemma_points = 0;
  bool sublemma_ok = false;
  bool pass = false;
};

// Point on the slice z = -L_b of the window [t0, t1] (z centered at the window's z-midpoint).
Point neck_base_point(const WarpedMetric& m, double t0, double t1, double L_b);
// With R1 <= 0 the constructive r0 is used, and R2 <= 0 means 2 R1.
RelVolReport relative_volume_report(const WarpedMetric& m, double t0, double t1,
                                    const Point& Q, double R1, double R2, double L_b,
                                    const RelVolOptions& opt = {});

}  // namespace neckscope
