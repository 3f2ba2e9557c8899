#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <memory>
#include <string>

#include "neckscope/error.hpp"
#include "neckscope/jet.hpp"
#include "neckscope/numerics.hpp"

namespace neckscope {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Family { Cylinder, Flat, Sphere, Flare, Dumbbell, Sampled };

std::string family_name(Family f);

struct WarpSpec {
  Family family = Family::Flat;
  int n = 3;
  double t_min = 0.0;
  double t_max = kInf;
  bool pole_min = false;
  bool pole_max = false;
  // A finite t_max that stands in for a noncompact end.
  bool truncated = false;
  double c = 1.0;      // cylinder radius
  double a = 1.0;      // sphere radius
  double sigma = 0.5;  // flare slope at infinity
  double A = 0.8;      // dumbbell pinch
  std::shared_ptr<const CubicSpline> grid;  // sampled warp (unscaled units)
  // Homothety: phi(t) = scale * phi0(t / scale). Domain is in scaled units.
  double scale = 1.0;
};

WarpSpec cylinder_spec(double c, double t_min = -10, double t_max = 10, int n = 3);
WarpSpec flat_spec(int n = 3, double t_max = kInf);
WarpSpec sphere_spec(double a, int n = 3);
WarpSpec flare_spec(double sigma, int n = 3, double t_max = kInf);
WarpSpec dumbbell_spec(double A, int n = 3);
// Pole flags are set where phi vanishes at an end.
WarpSpec sampled_spec(const Eigen::VectorXd& t, const Eigen::VectorXd& phi, int n = 3);
WarpSpec read_sampled_csv(const std::string& path, int n = 3);
// The metric lambda^2 g: phi -> lambda phi(t/lambda), domain scaled.
WarpSpec scaled(WarpSpec s, double lambda);

class WarpedMetric {
 public:
  explicit WarpedMetric(WarpSpec spec);

  const WarpSpec& spec() const { return spec_; }
  int n() const { return spec_.n; }
  double t_min() const { return spec_.t_min; }
  double t_max() const { return spec_.t_max; }
  bool has_pole() const { return spec_.pole_min || spec_.pole_max; }
  bool noncompact() const;
  bool contains(double t) const { return t >= spec_.t_min && t <= spec_.t_max; }

  double phi(double t) const { return eval<0>(t).c[0]; }
  double dphi(double t) const { return eval<1>(t).c[1]; }
  double d2phi(double t) const { return eval<2>(t).deriv(2); }

  // Taylor jet of phi at t, exact for closed-form presets.
  template <int N>
  Jet<double, N> eval(double t) const {
    return phi_generic(Jet<double, N>::variable(t), t);
  }

  template <class T>
  T phi_generic(const T& t, double tv) const {
    const double s = spec_.scale;
    const T u = t * (1.0 / s);
    const double uv = tv / s;
    return base_phi(u, uv) * s;
  }

 private:
  template <class T>
  T base_phi(const T& u, double uv) const {
    using std::exp;
    using std::sin;
    switch (spec_.family) {
      case Family::Cylinder: return T(spec_.c) + u * 0.0;
      case Family::Flat: return u;
      case Family::Sphere: return sin(u * (1.0 / spec_.a)) * spec_.a;
      case Family::Flare: {
        const double sg = spec_.sigma;
        return u * sg + (1.0 - exp(-u)) * (1.0 - sg);
      }
      case Family::Dumbbell: {
        const T sn = sin(u);
        return sn * (1.0 - sn * sn * spec_.A);
      }
      case Family::Sampled: return spec_.grid->eval_generic(u, uv);
    }
    return u;
  }

  WarpSpec spec_;
};

WarpedMetric make_metric(const WarpSpec& spec);

struct CurvatureSample {
  double t = 0;
  double K_rad = 0;
  double K_sph = 0;
  double R = 0;
  Eigen::VectorXd ricci;  // radial first, then the n-1 spherical eigenvalues
};

CurvatureSample curvature_at(const WarpedMetric& m, double t);

struct Point {
  double t = 0;
  Eigen::VectorXd theta;  // unit vector in R^n
};

Point make_point(const WarpedMetric& m, double t, const Eigen::VectorXd& theta);
// Point at parameter t whose direction makes angle `angle` with e_1 in the e_1,e_2 plane.
Point meridian_point(const WarpedMetric& m, double t, double angle);
double sphere_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Tangent vector: dt component and dtheta (orthogonal to theta, in R^n).
struct Tangent {
  double dt = 0;
  Eigen::VectorXd dtheta;
};

struct DistanceInfo {
  double length = 0;
  double psi0 = 0;     // initial angle between the geodesic and d/dt at p
  bool via_pole = false;
  bool closed_form = false;
};

double distance(const WarpedMetric& m, const Point& p, const Point& q);
DistanceInfo distance_info(const WarpedMetric& m, const Point& p, const Point& q,
                           bool allow_closed_form = true);
// Distance between (t1, angle 0) and (t2, angle delta) in the meridian plane.
DistanceInfo meridian_distance(const WarpedMetric& m, double t1, double t2, double delta,
                               bool allow_closed_form = true);
// Cheap bounds lower <= d <= upper for meridian points.
std::pair<double, double> distance_bounds(const WarpedMetric& m, double t1, double t2,
                                          double delta);

struct GeodesicEnd {
  Point point;
  Tangent tangent;
  double clairaut_start = 0;
  double clairaut_end = 0;
};

GeodesicEnd geodesic_shoot(const WarpedMetric& m, const Point& start, const Tangent& dir,
                           double length);

// Meridian-plane geodesic from (t0, 0) with initial angle psi0 to d/dt.
struct MeridianTrace {
  enum class Status { Done, Event, ExitLow, ExitHigh, NearPole, StepFailure };
  Status status = Status::Done;
  double s = 0, t = 0, alpha = 0, psi = 0;
  double max_clairaut_drift = 0;  // relative
};

struct MeridianEvents {
  double alpha_target = kInf;  // stop when alpha reaches this
  double t_target = kInf;      // stop when t crosses this
  double rtol = 1e-11;
};

MeridianTrace trace_meridian(const WarpedMetric& m, double t0, double psi0, double s_max,
                             const MeridianEvents& ev = {});

double ball_volume(const WarpedMetric& m, double r);

struct McEstimate {
  double value = 0;
  double stderr_ = 0;
  long samples = 0;
};

McEstimate annulus_volume_mc(const WarpedMetric& m, const Point& Q, double R1, double R2,
                             long samples, std::uint64_t seed = 7, int jobs = 0);

}  // namespace neckscope
