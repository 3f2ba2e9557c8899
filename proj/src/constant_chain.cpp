#include "neckscope/constant_chain.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "neckscope/error.hpp"
#include "neckscope/hypersurface_gauss_bonnet.hpp"
#include "neckscope/neck_analysis.hpp"

namespace neckscope {

namespace {

void check_odd(int n) {
  if (n < 3) fail(Errc::InvalidInput, "dimension must be >= 3");
  if (n % 2 == 0) fail(Errc::OddDimensionOnly, "the chain needs odd n, got " + std::to_string(n));
}

// (x+2)^n - (x-2)^n summed over odd binomial terms, free of cancellation.
double cube_gap(int n, double x) {
  double s = 0, binom = 1;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) binom = binom * (n - k + 1) / k;
    if (k % 2 == 1) s += 2 * binom * std::pow(2.0, k) * std::pow(x, n - k);
  }
  return s;
}

double log_rhs(int n, double a, double c_n) {
  const int m = (n - 1) / 2;
  double sum = 0;
  for (int p = 1; p <= m; ++p) sum += std::pow(a, 2 * p);
  return -std::log1p(c_n * sum) - n * std::log1p(12 * a / std::numbers::pi);
}

}  // namespace

double delta_of_Lb(int n, double L_b) {
  check_odd(n);
  if (!(L_b >= 16)) fail(Errc::BelowFloor, "L_b must be >= 16, got " + std::to_string(L_b));
  return n * std::pow(1.1, n) * (10.0 / 9.0) * 12 / cube_gap(n, 0.9 * L_b);
}

double ascr_root(int n, double L0, double c_n) {
  if (!(c_n > 0)) fail(Errc::InvalidInput, "c(n) must be positive");
  const double target = std::log(delta_of_Lb(n, L0));
  double lo = 0, hi = 1;
  while (log_rhs(n, hi, c_n) > target) {
    lo = hi;
    hi *= 2;
    if (hi > 1e150) fail(Errc::Overflow, "ASCR root out of range");
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (log_rhs(n, mid, c_n) > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double ascr_lower_bound(int n, double L0, double c_n, double eta1) {
  if (!(eta1 > 0 && eta1 < 1)) fail(Errc::InvalidInput, "eta1 must be in (0,1)");
  const double a = ascr_root(n, L0, c_n) - eta1;
  return a > 0 ? a * a : 0.0;
}

ChainConstants constants_for(int n, double C0, const ChainConfig& cfg) {
  check_odd(n);
  if (!(C0 >= 0) || !std::isfinite(C0)) fail(Errc::Overflow, "C0 must be finite and >= 0");
  ChainConstants c;
  c.n = n;
  c.c_n = cfg.c_n > 0 ? cfg.c_n : gauss_bonnet_constant(n);
  c.c_n_configured = cfg.c_n > 0;
  c.eps_a = cfg.eps_a;
  c.k_a = cfg.k_a;
  c.L_a = cfg.L_a;
  c.eta1 = cfg.eta1;
  c.eta2 = cfg.eta2;
  c.C0_requested = C0;
  auto bound = [&](double L) { return ascr_lower_bound(n, L, c.c_n, c.eta1); };
  const double floor_L = std::max(cfg.L_a, 16.0);
  double L = floor_L;
  if (C0 > 0 && bound(floor_L) < C0) {
    double lo = floor_L, hi = 2 * floor_L;
    while (bound(hi) < C0) {
      lo = hi;
      hi *= 2;
      if (hi > 1e200) fail(Errc::Overflow, "no L_b reaches C0 = " + std::to_string(C0));
    }
    while (hi - lo > 1e-12 * hi) {
      const double mid = 0.5 * (lo + hi);
      if (bound(mid) >= C0) hi = mid;
      else lo = mid;
    }
    L = hi;
  }
  c.L_b = L;
  c.delta = delta_of_Lb(n, L);
  c.eps_b = epsilon_prime(0.1, 1, L, n);
  c.eps0 = std::min(cfg.eps_a, c.eps_b);
  c.k0 = cfg.k_a;
  c.L0 = L;
  c.C0 = bound(L);
  return c;
}

std::string chain_toml(const ChainConstants& c) {
  std::ostringstream o;
  auto num = [](double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.17g", v);
    return std::string(b);
  };
  o << "[chain]\n";
  o << "n = " << c.n << "\n";
  o << "C0_requested = " << num(c.C0_requested) << "\n";
  o << "c_n = " << num(c.c_n) << "\n";
  o << "eps_a = " << num(c.eps_a) << "\n";
  o << "k_a = " << c.k_a << "\n";
  o << "L_a = " << num(c.L_a) << "\n";
  o << "eta1 = " << num(c.eta1) << "\n";
  o << "eta2 = " << num(c.eta2) << "\n";
  o << "L_b = " << num(c.L_b) << "\n";
  o << "delta = " << num(c.delta) << "\n";
  o << "eps_b = " << num(c.eps_b) << "\n";
  o << "eps0 = " << num(c.eps0) << "\n";
  o << "k0 = " << c.k0 << "\n";
  o << "L0 = " << num(c.L0) << "\n";
  o << "C0 = " << num(c.C0) << "\n";
  o << "\n[provenance]\n";
  o << "c_n = " << (c.c_n_configured ? "\"configured\"" : "\"derived\"") << "\n";
  o << "eps_a = \"configured-placeholder\"\n";
  o << "k_a = \"configured-placeholder\"\n";
  o << "L_a = \"configured-placeholder\"\n";
  o << "eta1 = \"configured\"\n";
  o << "eta2 = \"configured\"\n";
  o << "L_b = \"derived\"\n";
  o << "delta = \"formula\"\n";
  o << "eps_b = \"formula\"\n";
  o << "eps0 = \"formula\"\n";
  o << "C0 = \"formula\"\n";
  return o.str();
}

}  // namespace neckscope
