#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "patemb/errors.hpp"

namespace patemb {

/// Row-major dense matrix of doubles. Deliberately minimal; everything in
/// this project is small enough that naive loops are exact and fast.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  double na = norm2(a), nb = norm2(b);
  if (na <= 0.0 || nb <= 0.0) throw numeric_error("cosine of zero-norm vector");
  return dot(a, b) / (na * nb);
}

/// In-place L2 normalization; throws on (near-)zero input.
inline void normalize(std::span<double> v, double eps = 1e-12) {
  double n = norm2(v);
  if (n < eps) throw numeric_error("degenerate_embedding: zero-norm vector");
  for (double& x : v) x /= n;
}

/// Eigenvalues (and optionally eigenvectors) of a symmetric matrix by cyclic
/// Jacobi rotations. Off-diagonal magnitudes are annihilated in sweeps until
/// their sum drops below `tol`. A is consumed. Eigenvalues are returned
/// unordered; callers sort as needed. Eigenvectors, when requested, are the
/// columns of `vecs`.
inline std::vector<double> jacobi_eigenvalues(Matrix A, double tol = 1e-12,
                                              Matrix* vecs = nullptr,
                                              int max_sweeps = 100) {
  const std::size_t n = A.rows;
  if (A.cols != n) throw numeric_error("jacobi: matrix not square");
  if (vecs) {
    *vecs = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) (*vecs)(i, i) = 1.0;
  }
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::fabs(A(p, q));
    if (off < tol) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = A(p, q);
        if (std::fabs(apq) < tol / (n * n)) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        // stable tangent of the rotation angle
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        if (vecs) {
          for (std::size_t k = 0; k < n; ++k) {
            double vkp = (*vecs)(k, p), vkq = (*vecs)(k, q);
            (*vecs)(k, p) = c * vkp - s * vkq;
            (*vecs)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = A(i, i);
  return eig;
}

}  // namespace patemb
