#include "xview/tensor.hpp"

namespace xview::num {

Tensor t_matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
  const int ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  const int n = trans_a ? ac : ar;
  const int k = trans_a ? ar : ac;
  const int kb = trans_b ? bc : br;
  const int m = trans_b ? br : bc;
  if (k != kb)
    throw ShapeError("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor c({n, m});
  const double* A = a.data.data();
  const double* B = b.data.data();
  double* C = c.data.data();
  if (!trans_a && !trans_b) {
    for (int i = 0; i < n; ++i) {
      const double* arow = A + static_cast<size_t>(i) * k;
      double* crow = C + static_cast<size_t>(i) * m;
      for (int p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        const double* brow = B + static_cast<size_t>(p) * m;
        for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
    }
  } else if (!trans_a && trans_b) {
    for (int i = 0; i < n; ++i) {
      const double* arow = A + static_cast<size_t>(i) * k;
      double* crow = C + static_cast<size_t>(i) * m;
      for (int j = 0; j < m; ++j) {
        const double* brow = B + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += arow[p] * brow[p];
        crow[j] = s;
      }
    }
  } else if (trans_a && !trans_b) {
    for (int p = 0; p < k; ++p) {
      const double* arow = A + static_cast<size_t>(p) * n;
      const double* brow = B + static_cast<size_t>(p) * m;
      for (int i = 0; i < n; ++i) {
        const double av = arow[i];
        if (av == 0.0) continue;
        double* crow = C + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      double* crow = C + static_cast<size_t>(i) * m;
      for (int j = 0; j < m; ++j) {
        const double* brow = B + static_cast<size_t>(j) * k;
        double s = 0.0;
        for (int p = 0; p < k; ++p) s += A[static_cast<size_t>(p) * n + i] * brow[p];
        crow[j] = s;
      }
    }
  }
  return c;
}

}  // namespace xview::num
