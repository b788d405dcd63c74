#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace gridcase::opt {

/// Value, gradient and packed lower-triangular Hessian over N local variables.
template <std::size_t N>
struct Dual2 {
  static constexpr std::size_t kPacked = N * (N + 1) / 2;

  double v = 0.0;
  std::array<double, N> g{};
  std::array<double, kPacked> h{};

  Dual2() = default;
  Dual2(double value) : v(value) {}  // NOLINT: constants mix freely with variables

  static Dual2 variable(double value, std::size_t index) {
    Dual2 d(value);
    d.g[index] = 1.0;
    return d;
  }

  static constexpr std::size_t at(std::size_t i, std::size_t j) {
    return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i;
  }
};

namespace detail {

// f(a) with f' = d1 and f'' = d2 evaluated at a.v.
template <std::size_t N>
Dual2<N> chain(const Dual2<N>& a, double value, double d1, double d2) {
  Dual2<N> r(value);
  for (std::size_t i = 0; i < N; ++i) r.g[i] = d1 * a.g[i];
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      std::size_t k = Dual2<N>::at(i, j);
      r.h[k] = d1 * a.h[k] + d2 * a.g[i] * a.g[j];
    }
  }
  return r;
}

}  // namespace detail

template <std::size_t N>
Dual2<N> operator-(const Dual2<N>& a) {
  Dual2<N> r(-a.v);
  for (std::size_t i = 0; i < N; ++i) r.g[i] = -a.g[i];
  for (std::size_t k = 0; k < Dual2<N>::kPacked; ++k) r.h[k] = -a.h[k];
  return r;
}

template <std::size_t N>
Dual2<N> operator+(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v + b.v);
  for (std::size_t i = 0; i < N; ++i) r.g[i] = a.g[i] + b.g[i];
  for (std::size_t k = 0; k < Dual2<N>::kPacked; ++k) r.h[k] = a.h[k] + b.h[k];
  return r;
}

template <std::size_t N>
Dual2<N> operator-(const Dual2<N>& a, const Dual2<N>& b) {
  return a + (-b);
}

template <std::size_t N>
Dual2<N> operator*(const Dual2<N>& a, const Dual2<N>& b) {
  Dual2<N> r(a.v * b.v);
  for (std::size_t i = 0; i < N; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      std::size_t k = Dual2<N>::at(i, j);
      r.h[k] = a.v * b.h[k] + b.v * a.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
    }
  }
  return r;
}

template <std::size_t N>
Dual2<N> operator/(const Dual2<N>& a, const Dual2<N>& b) {
  double inv = 1.0 / b.v;
  return a * detail::chain(b, inv, -inv * inv, 2.0 * inv * inv * inv);
}

template <std::size_t N> Dual2<N> operator+(const Dual2<N>& a, double b) { return a + Dual2<N>(b); }
template <std::size_t N> Dual2<N> operator+(double a, const Dual2<N>& b) { return Dual2<N>(a) + b; }
template <std::size_t N> Dual2<N> operator-(const Dual2<N>& a, double b) { return a - Dual2<N>(b); }
template <std::size_t N> Dual2<N> operator-(double a, const Dual2<N>& b) { return Dual2<N>(a) - b; }
template <std::size_t N> Dual2<N> operator/(const Dual2<N>& a, double b) { return a * Dual2<N>(1.0 / b); }
template <std::size_t N> Dual2<N> operator/(double a, const Dual2<N>& b) { return Dual2<N>(a) / b; }

template <std::size_t N>
Dual2<N> operator*(const Dual2<N>& a, double b) {
  Dual2<N> r(a.v * b);
  for (std::size_t i = 0; i < N; ++i) r.g[i] = a.g[i] * b;
  for (std::size_t k = 0; k < Dual2<N>::kPacked; ++k) r.h[k] = a.h[k] * b;
  return r;
}
template <std::size_t N> Dual2<N> operator*(double a, const Dual2<N>& b) { return b * a; }

template <std::size_t N>
Dual2<N> sin(const Dual2<N>& a) {
  double s = std::sin(a.v);
  return detail::chain(a, s, std::cos(a.v), -s);
}

template <std::size_t N>
Dual2<N> cos(const Dual2<N>& a) {
  double c = std::cos(a.v);
  return detail::chain(a, c, -std::sin(a.v), -c);
}

template <std::size_t N>
Dual2<N> sqrt(const Dual2<N>& a) {
  double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

template <std::size_t N>
Dual2<N> exp(const Dual2<N>& a) {
  double e = std::exp(a.v);
  return detail::chain(a, e, e, e);
}

template <std::size_t N>
Dual2<N> log(const Dual2<N>& a) {
  return detail::chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}

template <std::size_t N>
Dual2<N> square(const Dual2<N>& a) {
  return detail::chain(a, a.v * a.v, 2.0 * a.v, 2.0);
}

inline double square(double a) { return a * a; }

}  // namespace gridcase::opt
