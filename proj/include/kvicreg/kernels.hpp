#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kvicreg/common.hpp"
#include "kvicreg/matrix.hpp"

namespace kvicreg {

enum class KernelKind { Linear, Polynomial, Rbf, Laplacian, RationalQuadratic };

inline const char* kernel_kind_name(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Rbf: return "rbf";
    case KernelKind::Laplacian: return "laplacian";
    case KernelKind::RationalQuadratic: return "rational_quadratic";
  }
  return "?";
}

// Bandwidth policy: a fixed positive gamma, or the median heuristic resolved
// per batch at evaluation time.
struct Bandwidth {
  enum class Mode { Fixed, MedianHeuristic };
  Mode mode = Mode::MedianHeuristic;
  double value = 1.0;  // Fixed only

  static Bandwidth fixed(double gamma) { return {Mode::Fixed, gamma}; }
  static Bandwidth median_heuristic() { return {Mode::MedianHeuristic, 1.0}; }
};

struct KernelSpec {
  KernelKind kind = KernelKind::Linear;
  int degree = 2;       // Polynomial only
  double coef0 = 1.0;   // Polynomial only
  Bandwidth bandwidth = Bandwidth::median_heuristic();
  double rq_alpha = 1.0;  // RationalQuadratic only

  void validate() const {
    if (kind == KernelKind::Polynomial && degree < 1)
      throw ValidationError("polynomial kernel requires degree >= 1");
    if (bandwidth.mode == Bandwidth::Mode::Fixed &&
        (!std::isfinite(bandwidth.value) || bandwidth.value <= 0.0))
      throw ValidationError("fixed bandwidth must be a positive real");
    if (kind == KernelKind::RationalQuadratic &&
        (!std::isfinite(rq_alpha) || rq_alpha <= 0.0))
      throw ValidationError("rational quadratic kernel requires rq_alpha > 0");
    if (kind == KernelKind::Polynomial && !std::isfinite(coef0))
      throw ValidationError("polynomial coef0 must be finite");
  }

  KernelSpec with_fixed_bandwidth(double gamma) const {
    KernelSpec s = *this;
    s.bandwidth = Bandwidth::fixed(gamma);
    return s;
  }
};

// One view's projector outputs, one row per sample.
struct EmbeddingBatch {
  Matrix data;

  EmbeddingBatch() = default;
  explicit EmbeddingBatch(Matrix m) : data(std::move(m)) {
    if (data.rows() == 0 || data.cols() == 0)
      throw ValidationError("embedding batch must be non-empty");
    if (!data.all_finite()) throw ValidationError("embedding batch has non-finite entries");
  }

  std::size_t size() const { return data.rows(); }
  std::size_t dim() const { return data.cols(); }
};

// b x b matrix of pairwise kernel evaluations over one batch. The centered
// flag tracks whether the double-centering transform has been applied; it
// exists to make accidental re-centering a loud failure.
struct GramMatrix {
  Matrix data;
  bool centered = false;
  KernelSpec kernel;
};

// b x b matrix with entry [i,j] = k(x_i, x'_j); not symmetric in general.
struct CrossGramMatrix {
  Matrix data;
};

// k(u, v) with a pre-resolved bandwidth gamma.
//   Linear:            u . v
//   Polynomial:        (u . v + coef0)^degree
//   RBF:               exp(-gamma * ||u - v||_2^2)
//   Laplacian:         exp(-gamma * ||u - v||_1)
//   RationalQuadratic: (1 + gamma * ||u - v||_2^2 / (2 alpha))^(-alpha)
inline double kernel_eval(const KernelSpec& spec, std::span<const double> u,
                          std::span<const double> v, double gamma) {
  if (u.size() != v.size()) throw ValidationError("kernel_eval: vectors differ in length");
  if (!std::isfinite(gamma) || gamma <= 0.0)
    throw ValidationError("kernel_eval: gamma must be a positive real");
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!std::isfinite(u[i]) || !std::isfinite(v[i]))
      throw ValidationError("kernel_eval: non-finite input");
  switch (spec.kind) {
    case KernelKind::Linear:
      return dot(u, v);
    case KernelKind::Polynomial:
      return std::pow(dot(u, v) + spec.coef0, static_cast<double>(spec.degree));
    case KernelKind::Rbf:
      return std::exp(-gamma * squared_distance(u, v));
    case KernelKind::Laplacian:
      return std::exp(-gamma * l1_distance(u, v));
    case KernelKind::RationalQuadratic:
      return std::pow(1.0 + gamma * squared_distance(u, v) / (2.0 * spec.rq_alpha),
                      -spec.rq_alpha);
  }
  throw ValidationError("kernel_eval: unknown kernel kind");
}

namespace detail {

// Median of a scratch vector (average of middle pair for even counts).
inline double median_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (lower + m);
  }
  return m;
}

}  // namespace detail

// Resolves the kernel bandwidth for a batch. Fixed policies pass through.
// The median heuristic uses gamma = 1 / (2 m) with m the median pairwise
// squared euclidean distance (RBF, RationalQuadratic) and gamma = 1 / m1 with
// m1 the median pairwise L1 distance (Laplacian); a zero median falls back to
// gamma = 1. Linear and Polynomial kernels take no bandwidth and return 1.
inline double resolve_bandwidth(const KernelSpec& spec, const EmbeddingBatch& batch) {
  spec.validate();
  if (spec.kind == KernelKind::Linear || spec.kind == KernelKind::Polynomial) return 1.0;
  if (spec.bandwidth.mode == Bandwidth::Mode::Fixed) return spec.bandwidth.value;
  const std::size_t b = batch.size();
  if (b < 2) throw ValidationError("resolve_bandwidth: median heuristic needs at least 2 rows");
  const bool l1 = spec.kind == KernelKind::Laplacian;
  std::vector<double> dists;
  dists.reserve(b * (b - 1) / 2);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = i + 1; j < b; ++j)
      dists.push_back(l1 ? l1_distance(batch.data.row(i), batch.data.row(j))
                         : squared_distance(batch.data.row(i), batch.data.row(j)));
  const double m = detail::median_in_place(dists);
  if (m == 0.0) return 1.0;
  return l1 ? 1.0 / m : 1.0 / (2.0 * m);
}

inline GramMatrix gram(const KernelSpec& spec, const EmbeddingBatch& batch, double gamma) {
  const std::size_t b = batch.size();
  GramMatrix g{Matrix(b, b), false, spec};
  // each pair evaluated once and mirrored, so symmetry is exact
  parallel_for(b, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = i; j < b; ++j) {
        const double v = kernel_eval(spec, batch.data.row(i), batch.data.row(j), gamma);
        g.data(i, j) = v;
        g.data(j, i) = v;
      }
  });
  return g;
}

inline GramMatrix gram(const KernelSpec& spec, const EmbeddingBatch& batch) {
  return gram(spec, batch, resolve_bandwidth(spec, batch));
}

inline CrossGramMatrix cross_gram(const KernelSpec& spec, const EmbeddingBatch& batch_a,
                                  const EmbeddingBatch& batch_b, double gamma) {
  if (batch_a.size() != batch_b.size() || batch_a.dim() != batch_b.dim())
    throw ValidationError("cross_gram: batch shapes differ");
  const std::size_t b = batch_a.size();
  CrossGramMatrix g{Matrix(b, b)};
  parallel_for(b, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < b; ++j)
        g.data(i, j) = kernel_eval(spec, batch_a.data.row(i), batch_b.data.row(j), gamma);
  });
  return g;
}

// Bandwidth for paired views is resolved once from the 2b-row concatenation so
// all Gram matrices of the pair live in the same RKHS.
inline double resolve_pair_bandwidth(const KernelSpec& spec, const EmbeddingBatch& batch_a,
                                     const EmbeddingBatch& batch_b) {
  if (batch_a.dim() != batch_b.dim())
    throw ValidationError("resolve_pair_bandwidth: batch dims differ");
  if (spec.kind == KernelKind::Linear || spec.kind == KernelKind::Polynomial) return 1.0;
  if (spec.bandwidth.mode == Bandwidth::Mode::Fixed) {
    spec.validate();
    return spec.bandwidth.value;
  }
  return resolve_bandwidth(spec, EmbeddingBatch(vstack(batch_a.data, batch_b.data)));
}

inline CrossGramMatrix cross_gram(const KernelSpec& spec, const EmbeddingBatch& batch_a,
                                  const EmbeddingBatch& batch_b) {
  if (batch_a.size() != batch_b.size() || batch_a.dim() != batch_b.dim())
    throw ValidationError("cross_gram: batch shapes differ");
  return cross_gram(spec, batch_a, batch_b, resolve_pair_bandwidth(spec, batch_a, batch_b));
}

namespace detail {

// H A H with H = I - (1/b) 1 1^T, computed by subtracting row and column means
// and adding back the grand mean. No flag bookkeeping; double_center() is the
// guarded public entry point. For symmetric input the upper triangle is
// computed once and mirrored, so symmetry survives bit for bit.
inline Matrix double_center_data(const Matrix& a) {
  const std::size_t b = a.rows();
  std::vector<double> row_mean(b, 0.0), col_mean(b, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      row_mean[i] += a(i, j);
      col_mean[j] += a(i, j);
    }
  for (std::size_t i = 0; i < b; ++i) {
    row_mean[i] /= static_cast<double>(b);
    grand += row_mean[i];
  }
  for (std::size_t j = 0; j < b; ++j) col_mean[j] /= static_cast<double>(b);
  grand /= static_cast<double>(b);
  const bool symmetric = [&] {
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t j = i + 1; j < b; ++j)
        if (a(i, j) != a(j, i)) return false;
    return true;
  }();
  Matrix out(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    const std::size_t j0 = symmetric ? i : 0;
    for (std::size_t j = j0; j < b; ++j) {
      out(i, j) = a(i, j) - row_mean[i] - col_mean[j] + grand;
      if (symmetric) out(j, i) = out(i, j);
    }
  }
  return out;
}

}  // namespace detail

inline GramMatrix double_center(const GramMatrix& g) {
  if (g.centered) throw ValidationError("double_center: input is already centered");
  if (g.data.rows() != g.data.cols()) throw ValidationError("double_center: matrix not square");
  return GramMatrix{detail::double_center_data(g.data), true, g.kernel};
}

}  // namespace kvicreg
