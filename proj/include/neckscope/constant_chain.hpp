#pragma once

#include <string>

namespace neckscope {

struct ChainConfig {
  double c_n = 0;  // <= 0 selects gauss_bonnet_constant(n)
  // Schoenflies placeholders, not from the source.
  double eps_a = 0.1;
  int k_a = 2;
  double L_a = 16;
  double eta1 = 0.5;
  double eta2 = 0.5;
};

struct ChainConstants {
  int n = 3;
  double c_n = 1;
  bool c_n_configured = false;
  double eps_a = 0.1;
  int k_a = 2;
  double L_a = 16;
  double eta1 = 0.5, eta2 = 0.5;
  double L_b = 16;
  double delta = 0;
  double eps_b = 0;
  double eps0 = 0;
  int k0 = 2;
  double L0 = 16;
  double C0 = 0;  // ascr_lower_bound at L0
  double C0_requested = 0;
};

double delta_of_Lb(int n, double L_b);
// Root a* of RHS(a) = delta_of_Lb(n, L0) and the resulting bound (a* - eta1)^2, clamped at 0.
double ascr_root(int n, double L0, double c_n);
double ascr_lower_bound(int n, double L0, double c_n, double eta1);
ChainConstants constants_for(int n, double C0, const ChainConfig& cfg = {});
std::string chain_toml(const ChainConstants& c);

}  // namespace neckscope
