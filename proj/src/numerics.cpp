#include "neckscope/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>

#include "neckscope/error.hpp"

namespace neckscope {

double sphere_volume(int k) {
  const double h = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

namespace {

double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa,
                   double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6 * (fm + 4 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15 * tol) return left + right + delta / 15;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol,
                 int max_depth) {
  if (a == b) return 0.0;
  // A few fixed panels first so narrow features are not skipped.
  constexpr int panels = 8;
  double sum = 0;
  const double w = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double x0 = a + p * w, x1 = (p + 1 == panels) ? b : a + (p + 1) * w;
    const double f0 = f(x0), f1 = f(x1), fm = f(0.5 * (x0 + x1));
    const double whole = (x1 - x0) / 6 * (f0 + 4 * fm + f1);
    sum += simpson_rec(f, x0, x1, f0, fm, f1, whole, tol / panels, max_depth);
  }
  return sum;
}

CubicSpline::CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
  const int n = static_cast<int>(x_.size());
  if (n < 3 || y_.size() != n) fail(Errc::InvalidSpec, "spline needs >= 3 matching knots");
  for (int i = 1; i < n; ++i)
    if (!(x_(i) > x_(i - 1))) fail(Errc::InvalidSpec, "spline knots must increase strictly");
  m_ = Eigen::VectorXd::Zero(n);
  // Thomas algorithm for the natural-spline tridiagonal system.
  Eigen::VectorXd c(n), d(n);
  c.setZero();
  d.setZero();
  for (int i = 1; i < n - 1; ++i) {
    const double h0 = x_(i) - x_(i - 1), h1 = x_(i + 1) - x_(i);
    const double a = h0, b = 2 * (h0 + h1), cc = h1;
    const double r = 6 * ((y_(i + 1) - y_(i)) / h1 - (y_(i) - y_(i - 1)) / h0);
    const double denom = b - a * c(i - 1);
    c(i) = cc / denom;
    d(i) = (r - a * d(i - 1)) / denom;
  }
  for (int i = n - 2; i >= 1; --i) m_(i) = d(i) - c(i) * m_(i + 1);
}

int CubicSpline::piece(double x) const {
  const int n = static_cast<int>(x_.size());
  const double* b = x_.data();
  const double* it = std::upper_bound(b, b + n, x);
  int i = static_cast<int>(it - b) - 1;
  return std::clamp(i, 0, n - 2);
}

Eigen::Vector4d CubicSpline::coefficients(int i) const {
  const double h = x_(i + 1) - x_(i);
  Eigen::Vector4d c;
  c(0) = y_(i);
  c(1) = (y_(i + 1) - y_(i)) / h - h * (2 * m_(i) + m_(i + 1)) / 6;
  c(2) = m_(i) / 2;
  c(3) = (m_(i + 1) - m_(i)) / (6 * h);
  return c;
}

double CubicSpline::operator()(double x) const { return derivative(x, 0); }

double CubicSpline::derivative(double x, int order) const {
  const int i = piece(x);
  const Eigen::Vector4d c = coefficients(i);
  const double h = x - x_(i);
  switch (order) {
    case 0: return ((c(3) * h + c(2)) * h + c(1)) * h + c(0);
    case 1: return (3 * c(3) * h + 2 * c(2)) * h + c(1);
    case 2: return 6 * c(3) * h + 2 * c(2);
    case 3: return 6 * c(3);
    default: return 0.0;
  }
}

namespace {
std::uint64_t splitmix(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  for (auto& s : s_) s = splitmix(seed);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2 * std::numbers::pi * u2);
  has_spare_ = true;
  return r * std::cos(2 * std::numbers::pi * u2);
}

std::uint64_t batch_seed(std::uint64_t seed, std::uint64_t batch) {
  std::uint64_t x = seed ^ (0xD1B54A32D192ED03ull * (batch + 1));
  return splitmix(x);
}

int resolve_jobs(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("NECKSCOPE_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

void parallel_batches(int nbatches, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, nbatches));
  if (jobs == 1) {
    for (int b = 0; b < nbatches; ++b) fn(b);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(nbatches);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (int b = next++; b < nbatches; b = next++) {
        try {
          fn(b);
        } catch (...) {
          errors[b] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace neckscope
