#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "kvicreg/common.hpp"
#include "kvicreg/matrix.hpp"

namespace kvicreg {

// Full spectrum of a symmetric matrix. Eigenvalues sorted descending;
// eigenvector column i pairs with eigenvalue i.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

inline double frobenius_sq(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (!std::isfinite(v)) throw ValidationError("frobenius_sq: non-finite entry");
      s += v * v;
    }
  return s;
}

inline double trace(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("trace: matrix not square");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, i);
  return s;
}

namespace detail {

inline double offdiag_frobenius_sq(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j) s += 2.0 * a(i, j) * a(i, j);
  return s;
}

}  // namespace detail

// Cyclic Jacobi rotations. Converged when the off-diagonal Frobenius norm
// drops below 1e-12 of the initial Frobenius norm; throws after 100 sweeps.
inline EigenDecomposition symmetric_eig(const Matrix& input) {
  const std::size_t n = input.rows();
  if (n == 0 || input.cols() != n) throw ValidationError("symmetric_eig: matrix not square");
  double amax = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(input(i, j))) throw ValidationError("symmetric_eig: non-finite entry");
      amax = std::max(amax, std::fabs(input(i, j)));
    }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(input(i, j) - input(j, i)) > 1e-9 * std::max(1.0, amax))
        throw ValidationError("symmetric_eig: input is not symmetric");

  Matrix a = input;
  // fold tiny asymmetry (within tolerance above) into an exactly symmetric copy
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  Matrix v = Matrix::identity(n);

  const double fro_init = std::sqrt(frobenius_sq(a));
  const double tol = 1e-12 * fro_init;
  constexpr int kMaxSweeps = 100;

  int sweep = 0;
  while (std::sqrt(detail::offdiag_frobenius_sq(a)) > tol) {
    if (sweep++ >= kMaxSweeps)
      throw ValidationError("symmetric_eig: no convergence after 100 sweeps");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        const double app = a(p, p), aqq = a(q, q);
        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r != p && r != q) {
            const double arp = a(r, p), arq = a(r, q);
            a(r, p) = arp - s * (arq + tau * arp);
            a(p, r) = a(r, p);
            a(r, q) = arq + s * (arp - tau * arq);
            a(q, r) = a(r, q);
          }
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    out.eigenvalues[k] = a(order[k], order[k]);
    for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, k) = v(r, order[k]);
  }
  return out;
}

}  // namespace kvicreg
