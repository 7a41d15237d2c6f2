#pragma once

#include "poirank/tensor.hpp"

namespace poirank {

// out += A (r x k) * B (k x c); B may be rank 1 (k). Per-element accumulation
// runs in ascending-k order in every caller, keeping results reproducible.
inline void matmul_into(Tensor& out, const Tensor& a, const Tensor& b) {
  size_t r = a.rows(), k = a.cols(), c = b.ndim() == 2 ? b.cols() : 1;
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < r; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * c;
    for (size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      const double* brow = pb + kk * c;
      for (size_t j = 0; j < c; ++j) orow[j] += av * brow[j];
    }
  }
}

// out (k [x c]) += A^T (k x r) * y (r [x c])
inline void matmul_transposed_into(Tensor& out, const Tensor& a, const Tensor& y) {
  size_t r = a.rows(), k = a.cols(), c = y.ndim() == 2 ? y.cols() : 1;
  const double* pa = a.data();
  const double* py = y.data();
  double* po = out.data();
  for (size_t i = 0; i < r; ++i) {
    const double* arow = pa + i * k;
    const double* yrow = py + i * c;
    for (size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      double* orow = po + kk * c;
      for (size_t j = 0; j < c; ++j) orow[j] += av * yrow[j];
    }
  }
}

// out (r x k) += y (r [x c]) * B^T, with B (k [x c])
inline void outer_accumulate(Tensor& out, const Tensor& y, const Tensor& b) {
  size_t r = out.rows(), k = out.cols(), c = b.ndim() == 2 ? b.cols() : 1;
  const double* py = y.data();
  const double* pb = b.data();
  double* po = out.data();
  for (size_t i = 0; i < r; ++i) {
    double* orow = po + i * k;
    const double* yrow = py + i * c;
    for (size_t kk = 0; kk < k; ++kk) {
      const double* brow = pb + kk * c;
      double acc = 0.0;
      for (size_t j = 0; j < c; ++j) acc += yrow[j] * brow[j];
      orow[kk] += acc;
    }
  }
}

}  // namespace poirank
