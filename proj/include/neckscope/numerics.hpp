#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace neckscope {

// Volume of the unit k-sphere S^k.
double sphere_volume(int k);

// Adaptive Simpson on [a,b] with absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 int max_depth = 48);

// Natural cubic spline through strictly increasing knots.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y);

  int size() const { return static_cast<int>(x_.size()); }
  double x_front() const { return x_(0); }
  double x_back() const { return x_(x_.size() - 1); }
  const Eigen::VectorXd& knots() const { return x_; }
  const Eigen::VectorXd& values() const { return y_; }

  // Index of the piece containing x (clamped to the end pieces).
  int piece(double x) const;
  // Piece polynomial y = c0 + c1 h + c2 h^2 + c3 h^3 with h = x - knot(i).
  Eigen::Vector4d coefficients(int i) const;

  double operator()(double x) const;
  double derivative(double x, int order) const;

  template <class T>
  T eval_generic(const T& x, double xv) const {
    const int i = piece(xv);
    const Eigen::Vector4d c = coefficients(i);
    const T h = x - x_(i);
    return ((h * c(3) + c(2)) * h + c(1)) * h + c(0);
  }

 private:
  Eigen::VectorXd x_, y_, m_;  // m_ = second derivatives at knots
};

// Dormand-Prince 5(4) with error control, for small fixed-size systems.
template <int D>
struct DormandPrince {
  using Vec = Eigen::Matrix<double, D, 1>;
  std::function<Vec(double, const Vec&)> rhs;
  double rtol = 1e-10;
  double atol = 1e-12;

  // One trial step; returns the 5th-order solution and writes the error norm.
  Vec trial(double s, const Vec& y, double h, double& err) const {
    static constexpr double a21 = 1.0 / 5, a31 = 3.0 / 40, a32 = 9.0 / 40, a41 = 44.0 / 45,
                            a42 = -56.0 / 15, a43 = 32.0 / 9, a51 = 19372.0 / 6561,
                            a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729,
                            a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656, b1 = 35.0 / 384,
                            b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84, e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                            e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                            e7 = -1.0 / 40;
    const Vec k1 = rhs(s, y);
    const Vec k2 = rhs(s + h / 5, y + h * a21 * k1);
    const Vec k3 = rhs(s + 3 * h / 10, y + h * (a31 * k1 + a32 * k2));
    const Vec k4 = rhs(s + 4 * h / 5, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vec k5 = rhs(s + 8 * h / 9, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vec k6 =
        rhs(s + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vec y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vec k7 = rhs(s + h, y5);
    const Vec e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const Vec sc = (atol + rtol * y.cwiseAbs().cwiseMax(y5.cwiseAbs()).array()).matrix();
    err = (e.array() / sc.array()).abs().maxCoeff();
    return y5;
  }

  // Adaptive step: advances (s,y) by an accepted step no larger than hmax,
  // updates the suggested step h. Returns false if h underflows.
  bool step(double& s, Vec& y, double& h, double hmax) const {
    h = std::min(h, hmax);
    for (int tries = 0; tries < 60; ++tries) {
      double err = 0;
      Vec y1 = trial(s, y, h, err);
      if (!std::isfinite(err)) err = 1e10;
      if (err <= 1.0) {
        s += h;
        y = y1;
        const double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
        return true;
      }
      h *= std::clamp(0.9 * std::pow(err, -0.25), 0.1, 0.5);
      if (h < 1e-300) return false;
    }
    return false;
  }
};

// Deterministic random stream: splitmix64-seeded xoshiro256**, with
// hand-rolled uniform/normal transforms so output does not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next();
  double uniform();                 // [0,1)
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  double normal();

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0;
};

// Seed for batch b of a stream with base seed `seed`.
std::uint64_t batch_seed(std::uint64_t seed, std::uint64_t batch);

// Worker count: explicit value if > 0, else NECKSCOPE_JOBS, else 1.
int resolve_jobs(int requested);

// Runs fn(b) for b in [0, nbatches) on up to `jobs` threads. fn must write
// only to its own slot; callers reduce afterwards in batch order.
void parallel_batches(int nbatches, int jobs, const std::function<void(int)>& fn);

}  // namespace neckscope
