#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "neckscope/warped_geometry.hpp"

namespace neckscope {

inline constexpr int kMaxNeckOrder = 6;

// Window [t0, t1] of a warped metric in the slice-normalized coordinate
// z = int dt / phi, with z = 0 at the t-midpoint.
class NeckWindow {
 public:
  NeckWindow(const WarpedMetric& m, double t0, double t1);

  double t0() const { return t0_; }
  double t1() const { return t1_; }
  double t_mid() const { return 0.5 * (t0_ + t1_); }
  double a() const { return a_; }
  double b() const { return b_; }
  double half_length() const { return 0.5 * (b_ - a_); }

  double z_of_t(double t) const;
  double t_of_z(double z) const;
  double r_of_z(double z) const;
  // omega_{n-1} * int_z^w r(y)^n dy
  double slab_volume(double z, double w) const;

  // Same maps in the unit-scale coordinate tb = t / scale.
  double z_base(double tb) const;
  double t_base(double z) const;

  // tb at each point of a uniform z-grid on [a, b].
  std::vector<double> t_grid(int points) const;

  const WarpedMetric& metric() const { return m_; }

 private:
  WarpedMetric m_;  // unit-scale copy, so results are scale invariant
  double scale_;
  double t0_, t1_;
  double a_ = 0, b_ = 0;
};

NeckWindow normalize_parametrization(const WarpedMetric& m, double t0, double t1);

struct NeckCertificate {
  double a = 0, b = 0;  // window in z
  double t0 = 0, t1 = 0;
  int k = 1;
  double L = 0;
  double eps_conformal = 0;
  double eps_logr = 0;
  double eps = 0;
  // sup |d^j log r / dz^j| for j = 1..k
  std::vector<double> eps_by_order;
  int grid_points = 0;
  // Normal-neck conditions other than the slice spacing hold by rotational symmetry.
  bool symmetric_conditions = true;
  bool pass = true;  // against the requirement it was checked with
};

struct NeckRequirement {
  double eps = 0;
  int k = 1;
  double L = 0;
};

// (e1,k1,L1) is at least as strict as (e2,k2,L2).
bool stricter_or_equal(const NeckRequirement& r1, const NeckRequirement& r2);
bool satisfies(const NeckCertificate& c, const NeckRequirement& req);

NeckCertificate certify_neck(const WarpedMetric& m, double t0, double t1, int k);
NeckCertificate certify_neck(const WarpedMetric& m, double t0, double t1,
                             const NeckRequirement& req);

struct AbsoluteNeckCertificate {
  double a = 0, b = 0;
  double t0 = 0, t1 = 0;
  int k = 1;
  double L = 0;
  double r_mid = 0;
  double eps_metric = 0;  // sup |r_mid^-2 g - gbar|
  std::vector<double> eps_by_order;  // sup |gbar-derivatives of order j|
  double eps_abs = 0;
  int grid_points = 0;
};

AbsoluteNeckCertificate certify_absolute_neck(const WarpedMetric& m, double t0, double t1,
                                              int k);

// Coefficients of the conversion bound for derivative order j: the order-j
// estimate is (1 + 4 e' L) e' (alpha_j + beta_j * |r^-2 g|).
struct ConversionCoefficients {
  double alpha = 0;
  double beta = 0;
};
const std::array<ConversionCoefficients, kMaxNeckOrder + 1>& conversion_table();
// Bell numbers, the coefficient sums of the complete Bell polynomials.
const std::array<double, kMaxNeckOrder + 1>& derivative_chain_constants();
double conversion_constant(int k, int n);
double conversion_constant_dimension_free(int k);

double epsilon_prime(double eps, int k, double L, int n = 3);
// Smallest eps with epsilon_prime(eps, k, L, n) >= eps_neck; +inf if eps_neck is above the caps.
double epsilon_for_neck(double eps_neck, int k, double L, int n = 3);

struct ConversionReport {
  NeckCertificate neck;
  AbsoluteNeckCertificate absolute;
  double eps = 0;        // target absolute tolerance
  double eps_prime = 0;  // epsilon_prime(eps, k, L)
  bool applicable = false;
  bool pass = true;
  double margin = 0;  // eps - eps_abs
};

// With eps <= 0 the target is the adversarial choice epsilon_for_neck(neck.eps).
ConversionReport verify_absolute_conversion(const WarpedMetric& m, double t0, double t1, int k,
                                            double eps = 0);

std::string neck_csv_header();
std::string neck_csv_row(const NeckCertificate& c);

}  // namespace neckscope
