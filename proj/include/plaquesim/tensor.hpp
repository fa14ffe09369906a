#pragma once

#include <array>
#include <cmath>

namespace plaque {

// 2-vector and 2x2 matrix over a generic scalar so that the same kernels can
// be evaluated with doubles (residual) and dual numbers (Jacobian).
template <class T>
struct Vec2 {
  T x{}, y{};

  T& operator[](int i) { return i == 0 ? x : y; }
  const T& operator[](int i) const { return i == 0 ? x : y; }
};

template <class T>
struct Mat2 {
  // row-major: a[i][j]
  std::array<std::array<T, 2>, 2> a{};

  static Mat2 identity() {
    Mat2 m;
    m.a[0][0] = T(1.0);
    m.a[1][1] = T(1.0);
    return m;
  }
  static Mat2 zero() { return Mat2{}; }

  T& operator()(int i, int j) { return a[i][j]; }
  const T& operator()(int i, int j) const { return a[i][j]; }
};

template <class T>
Mat2<T> operator+(const Mat2<T>& l, const Mat2<T>& r) {
  Mat2<T> m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.a[i][j] = l.a[i][j] + r.a[i][j];
  return m;
}

template <class T>
Mat2<T> operator-(const Mat2<T>& l, const Mat2<T>& r) {
  Mat2<T> m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.a[i][j] = l.a[i][j] - r.a[i][j];
  return m;
}

template <class T, class S>
Mat2<T> operator*(const S& s, const Mat2<T>& r) {
  Mat2<T> m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.a[i][j] = s * r.a[i][j];
  return m;
}

template <class T>
Mat2<T> operator*(const Mat2<T>& l, const Mat2<T>& r) {
  Mat2<T> m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m.a[i][j] = l.a[i][0] * r.a[0][j] + l.a[i][1] * r.a[1][j];
  return m;
}

template <class T>
Vec2<T> operator*(const Mat2<T>& l, const Vec2<T>& v) {
  return {l.a[0][0] * v.x + l.a[0][1] * v.y, l.a[1][0] * v.x + l.a[1][1] * v.y};
}

template <class T>
Vec2<T> operator+(const Vec2<T>& l, const Vec2<T>& r) {
  return {l.x + r.x, l.y + r.y};
}

template <class T>
Vec2<T> operator-(const Vec2<T>& l, const Vec2<T>& r) {
  return {l.x - r.x, l.y - r.y};
}

template <class T, class S>
Vec2<T> operator*(const S& s, const Vec2<T>& v) {
  return {s * v.x, s * v.y};
}

template <class T>
Mat2<T> transpose(const Mat2<T>& m) {
  Mat2<T> t;
  t.a[0][0] = m.a[0][0];
  t.a[0][1] = m.a[1][0];
  t.a[1][0] = m.a[0][1];
  t.a[1][1] = m.a[1][1];
  return t;
}

template <class T>
T det(const Mat2<T>& m) {
  return m.a[0][0] * m.a[1][1] - m.a[0][1] * m.a[1][0];
}

template <class T>
T trace(const Mat2<T>& m) {
  return m.a[0][0] + m.a[1][1];
}

// Caller guarantees det(m) != 0.
template <class T>
Mat2<T> inverse(const Mat2<T>& m) {
  const T d = det(m);
  Mat2<T> r;
  r.a[0][0] = m.a[1][1] / d;
  r.a[0][1] = -m.a[0][1] / d;
  r.a[1][0] = -m.a[1][0] / d;
  r.a[1][1] = m.a[0][0] / d;
  return r;
}

template <class T>
T double_contract(const Mat2<T>& l, const Mat2<T>& r) {
  return l.a[0][0] * r.a[0][0] + l.a[0][1] * r.a[0][1] + l.a[1][0] * r.a[1][0] +
         l.a[1][1] * r.a[1][1];
}

template <class T>
T dot(const Vec2<T>& l, const Vec2<T>& r) {
  return l.x * r.x + l.y * r.y;
}

using Point = Vec2<double>;
using Tensor2 = Mat2<double>;

inline double max_abs(const Tensor2& t) {
  double m = 0.0;
  for (const auto& row : t.a)
    for (double v : row) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace plaque
