#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "xview/errors.hpp"

namespace xview::num {

// Dense row-major 64-bit float array. Shapes are small here (tokens,
// embeddings, similarity matrices), so everything is a plain vector.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.0) {}
  Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<size_t>(numel_of(shape)) != data.size())
      throw ShapeError("tensor init: shape/data mismatch");
  }

  static int64_t numel_of(const std::vector<int>& s) {
    int64_t n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, double v) {
    Tensor t(std::move(s));
    for (auto& x : t.data) x = v;
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int rows() const { return shape.empty() ? 1 : (shape.size() == 1 ? 1 : shape[0]); }
  int cols() const { return shape.empty() ? 1 : (shape.size() == 1 ? shape[0] : shape[1]); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols() + c]; }
  double& operator[](size_t i) { return data[i]; }
  double operator[](size_t i) const { return data[i]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s + "]";
  }
};

// Plain numeric helpers used by op implementations and backward closures.

// C = op(A) * op(B), with optional transposes.
Tensor t_matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

inline void t_axpy(Tensor& y, double alpha, const Tensor& x) {
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline Tensor t_add(const Tensor& a, const Tensor& b) {
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] += b.data[i];
  return r;
}

inline Tensor t_sub(const Tensor& a, const Tensor& b) {
  Tensor r = a;
  for (size_t i = 0; i < r.data.size(); ++i) r.data[i] -= b.data[i];
  return r;
}

inline Tensor t_scale(const Tensor& a, double s) {
  Tensor r = a;
  for (auto& v : r.data) v *= s;
  return r;
}

inline double t_dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

inline double t_max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data) m = std::max(m, std::fabs(v));
  return m;
}

}  // namespace xview::num
