#pragma once

#include <string>
#include <vector>

#include "neckscope/warped_geometry.hpp"

namespace neckscope {

// Coefficient c(n) in |G - det L| <= c(n) sum_p K^p |L|^{2(m-p)} for umbilic
// hypersurfaces: the largest binomial C(m, p), p >= 1, with m = (n-1)/2.
double gauss_bonnet_constant(int n);

// Distance sphere at r + rho from the pole, parallel to the one at r.
struct ParallelSurface {
  double r = 0, rho = 0;
  double t = 0;      // slice parameter of the surface
  double phi = 0;    // intrinsic radius
  double kappa = 0;  // common principal curvature phi'/phi
  double K_sph = 0, K_rad = 0;  // ambient sectional curvatures at the surface
  double eps_K = 0;  // sqrt of sup of ambient K beyond the base sphere
  int n = 3;
};

// Supremum of the ambient sectional curvature on t >= t_min + r (sampled).
double ambient_curvature_sup(const WarpedMetric& m, double r);

// enforce_window = false skips the NotSmooth check; the distance spheres of a
// pole are smooth wherever phi > 0, the window is only the sufficient condition.
ParallelSurface parallel_surface(const WarpedMetric& m, double r, double rho,
                                 bool enforce_window = true);

struct WeingartenCheck {
  double kappa = 0, lower = 0, upper = 0;
  double lower_margin = 0, upper_margin = 0;
  bool pass = false;
};

WeingartenCheck weingarten_bound_check(const WarpedMetric& m, double r, double rho,
                                       double eps_K);

struct GBReport {
  int m = 1;
  double k_int = 0;  // intrinsic sectional curvature K_sph + kappa^2
  double G = 0, detL = 0, Q = 0;
  double area = 0, total = 0;
};

GBReport gauss_bonnet_integrand(const WarpedMetric& m, const ParallelSurface& s);

struct QBoundCheck {
  double Q = 0, bound = 0, a = 0, rho_max = 0;
  double fitted_c = 0;  // smallest c for which the bound holds here
  bool pass = false;
};

QBoundCheck q_bound_check(const WarpedMetric& m, double r, double rho, double eta2 = 0.5,
                          double c_n = 0);

struct AreaBoundCheck {
  double r = 0, rho = 0;
  double area = 0, bound = 0, margin = 0;
  double volume = 0, volume_bound = 0, volume_margin = 0;
  bool pass = false;
};

AreaBoundCheck area_lower_bound_check(const WarpedMetric& m, double r, double rho,
                                      double eta2 = 0.5, double c_n = 0);

std::string area_csv_header();
std::string area_csv_row(const AreaBoundCheck& c);

}  // namespace neckscope
