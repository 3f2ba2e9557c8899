#pragma once

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "neckscope/curvature_pinching.hpp"
#include "neckscope/warped_geometry.hpp"

namespace neckscope {

// Rotationally symmetric 3D Ricci flow, g = psi^2 ds^2 + phi^2 g_{S^2}, on a
// fixed uniform background grid in s, in Ricci-DeTurck gauge.
enum class EndKind { Pole, Fixed, Free };

struct FlowDiagnostics {
  double K_sup = 0;
  double R_max = 0, R_min = 0;
  double phi_min = 0;     // min of phi between the outermost local maxima next to poles
  int neck_index = -1;    // smallest interior local minimum of phi, -1 if none
  double inj_lower = 0;   // pi / sqrt(K_sup), recorded only
  double pole_regularity = 0;  // max | |dphi/darc| - 1 | over pole ends
};

struct FlowState {
  Eigen::VectorXd s, psi, phi;
  double t = 0;
  EndKind left = EndKind::Pole, right = EndKind::Pole;
  // 2 f f_s of the DeTurck background ds^2 + f^2 g_{S^2}, fixed at init.
  Eigen::VectorXd bg2;
  FlowDiagnostics diag;

  int size() const { return static_cast<int>(s.size()); }
  double h() const { return s(1) - s(0); }
};

struct FlowCurvature {
  Eigen::VectorXd phi_r, phi_rr, K_rad, K_sph, R;
};

FlowCurvature flow_curvature(const FlowState& st);
void update_diagnostics(FlowState& st);
// Eigenvalues (2 K_sph, 2 K_rad, 2 K_rad) at node i, so that R = lambda + mu + nu.
EigenTriple flow_eigen_triple(const FlowState& st, int i);
// Arclength from the left end at each node.
Eigen::VectorXd arclength(const FlowState& st);
// The state as a sampled warped metric in arclength.
WarpedMetric flow_metric(const FlowState& st);

// grid = number of nodes (>= 128). Round S^3: phi = a0 sin s, psi = a0.
FlowState init_round_sphere(double a0, int grid);
// Dumbbell: phi = sin x (1 - A sin^2 x) in arclength x on [0, pi]. The grid
// coordinate u has x = u + cluster/2 sin 2u, refining the middle by 1 - cluster.
FlowState init_dumbbell(double A, int grid, double cluster = 0);
// Any preset on its (finite) domain with psi = 1; ends without a pole get `far`.
FlowState init_flow(const WarpSpec& spec, int grid, EndKind far = EndKind::Free);

// Stable explicit step bound cfl * min(psi h, phi)^2.
double cfl_dt(const FlowState& st, double cfl = 0.4);
// One RK4 step; throws StepTooLarge above the bound and SingularityReached if
// phi <= 0 in the interior.
FlowState step(const FlowState& st, double dt, double cfl = 0.4);

struct FlowConfig {
  std::string profile = "dumbbell";  // dumbbell | round | cylinder | flare
  double A = 0.8;
  double a0 = 1;       // round radius, cylinder radius
  double sigma = 0.3;  // flare slope
  double cluster = 0.5;  // dumbbell grid refinement at the middle, in [0, 1)
  double length = 20;  // cylinder / flare truncation
  int grid = 1024;
  double cfl = 0.4;
  double stop_rmax = 1e4;
  double stop_phi_min = 1e-3;
  double stop_time = kInf;
  double wall_budget = 0;  // seconds, 0 = none
  long snapshot_every = 2000;
  double snapshot_rfactor = 1.1220184543019633;  // 10^(1/20)
};

FlowConfig parse_flow_config(std::istream& in);
FlowConfig read_flow_config(const std::string& path);
FlowState init_from_config(const FlowConfig& cfg);

struct RunHistory {
  std::vector<FlowState> snapshots;
  std::string stop_reason;
  long steps = 0;
  double wall_seconds = 0;
  double min_R_seen = kInf;  // over every step
};

RunHistory run_flow(const FlowState& start, const FlowConfig& cfg);

struct RescaledState {
  FlowState state;
  int base_index = 0;
  double base_s = 0, base_t = 0;
  double factor = 1;  // R at the base point before rescaling
};

// Lengths times sqrt(R(i)), time origin moved to the base time.
RescaledState rescale_state(const FlowState& st, int i);
// Base time must match a stored snapshot, else NotStored.
RescaledState rescale_at(const RunHistory& h, double s_i, double t_i);

struct NeckSample {
  double t = 0, rmax = 0;
  bool found = false;
  double eps_at_L = 0;  // neck eps on the z-window of half-length L at the center
  bool window_fits = false;
  double L_achieved = 0;  // largest centered half-length with eps <= eps_target
  double delta_star = 0;  // necklike delta of the center triple
  double center_s = 0;
};

NeckSample neck_at(const FlowState& st, int k, double L, double eps_target);
// Every `cadence`-th snapshot; requires phi_min to have halved over the run.
std::vector<NeckSample> track_neck(const RunHistory& h, int k, double L, double eps_target,
                                   int cadence = 1);

std::string snapshot_csv(const FlowState& st);  // s,psi,phi
std::string snapshot_manifest(const FlowState& st);
std::string neck_series_header();                // t,eps,L,rmax
std::string neck_series_row(const NeckSample& n);

}  // namespace neckscope
