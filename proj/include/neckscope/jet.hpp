#pragma once

// Truncated Taylor series c[i] = f^(i)(t0) / i!, used to get exact high-order
// derivatives of closed-form warps.

#include <array>
#include <cmath>

namespace neckscope {

template <class S, int N>
struct Jet {
  std::array<S, N + 1> c{};

  Jet() = default;
  Jet(S v) { c[0] = v; }  // NOLINT: implicit constants are the point

  static Jet variable(S t0) {
    Jet j(t0);
    if constexpr (N >= 1) j.c[1] = S(1);
    return j;
  }

  S value() const { return c[0]; }

  // i-th derivative at the expansion point.
  S deriv(int i) const {
    S f = S(1);
    for (int k = 2; k <= i; ++k) f *= S(k);
    return c[i] * f;
  }

  // d/dt; the top coefficient is lost.
  Jet derivative() const {
    Jet d;
    for (int i = 0; i < N; ++i) d.c[i] = S(i + 1) * c[i + 1];
    return d;
  }

  Jet& operator+=(const Jet& o) {
    for (int i = 0; i <= N; ++i) c[i] += o.c[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    for (int i = 0; i <= N; ++i) c[i] -= o.c[i];
    return *this;
  }
  Jet& operator*=(S s) {
    for (auto& x : c) x *= s;
    return *this;
  }
};

template <class S, int N>
Jet<S, N> operator+(Jet<S, N> a, const Jet<S, N>& b) { return a += b; }
template <class S, int N>
Jet<S, N> operator-(Jet<S, N> a, const Jet<S, N>& b) { return a -= b; }
template <class S, int N>
Jet<S, N> operator-(Jet<S, N> a) { return a *= S(-1); }
template <class S, int N>
Jet<S, N> operator+(Jet<S, N> a, S s) { a.c[0] += s; return a; }
template <class S, int N>
Jet<S, N> operator+(S s, Jet<S, N> a) { a.c[0] += s; return a; }
template <class S, int N>
Jet<S, N> operator-(Jet<S, N> a, S s) { a.c[0] -= s; return a; }
template <class S, int N>
Jet<S, N> operator-(S s, Jet<S, N> a) { a *= S(-1); a.c[0] += s; return a; }
template <class S, int N>
Jet<S, N> operator*(Jet<S, N> a, S s) { return a *= s; }
template <class S, int N>
Jet<S, N> operator*(S s, Jet<S, N> a) { return a *= s; }
template <class S, int N>
Jet<S, N> operator/(Jet<S, N> a, S s) { return a *= S(1) / s; }

template <class S, int N>
Jet<S, N> operator*(const Jet<S, N>& a, const Jet<S, N>& b) {
  Jet<S, N> r;
  for (int i = 0; i <= N; ++i) {
    S acc = S(0);
    for (int j = 0; j <= i; ++j) acc += a.c[j] * b.c[i - j];
    r.c[i] = acc;
  }
  return r;
}

template <class S, int N>
Jet<S, N> operator/(const Jet<S, N>& a, const Jet<S, N>& b) {
  Jet<S, N> q;
  for (int k = 0; k <= N; ++k) {
    S acc = a.c[k];
    for (int j = 1; j <= k; ++j) acc -= b.c[j] * q.c[k - j];
    q.c[k] = acc / b.c[0];
  }
  return q;
}

template <class S, int N>
Jet<S, N> operator/(S s, const Jet<S, N>& b) { return Jet<S, N>(s) / b; }

template <class S, int N>
Jet<S, N> exp(const Jet<S, N>& a) {
  using std::exp;
  Jet<S, N> b;
  b.c[0] = exp(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    S acc = S(0);
    for (int j = 1; j <= k; ++j) acc += S(j) * a.c[j] * b.c[k - j];
    b.c[k] = acc / S(k);
  }
  return b;
}

template <class S, int N>
Jet<S, N> log(const Jet<S, N>& a) {
  using std::log;
  Jet<S, N> b;
  b.c[0] = log(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    S acc = a.c[k];
    for (int j = 1; j < k; ++j) acc -= S(j) * b.c[j] * a.c[k - j] / S(k);
    b.c[k] = acc / a.c[0];
  }
  return b;
}

template <class S, int N>
void sincos(const Jet<S, N>& a, Jet<S, N>& s, Jet<S, N>& co) {
  using std::cos;
  using std::sin;
  s = Jet<S, N>();
  co = Jet<S, N>();
  s.c[0] = sin(a.c[0]);
  co.c[0] = cos(a.c[0]);
  for (int k = 1; k <= N; ++k) {
    S as = S(0), ac = S(0);
    for (int j = 1; j <= k; ++j) {
      as += S(j) * a.c[j] * co.c[k - j];
      ac += S(j) * a.c[j] * s.c[k - j];
    }
    s.c[k] = as / S(k);
    co.c[k] = -ac / S(k);
  }
}

template <class S, int N>
Jet<S, N> sin(const Jet<S, N>& a) {
  Jet<S, N> s, c;
  sincos(a, s, c);
  return s;
}

template <class S, int N>
Jet<S, N> cos(const Jet<S, N>& a) {
  Jet<S, N> s, c;
  sincos(a, s, c);
  return c;
}

}  // namespace neckscope
