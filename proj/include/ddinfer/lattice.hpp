#pragma once

// Uniform grids: the rounding transport map, box grids of cell centers, and
// lattice points inside an ellipsoid, streamed to a callback.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"

namespace ddinfer {

/// Componentwise delta * floor(y / delta + 1/2).
inline Vec grid_transport(const Vec& y, double delta) {
  if (!(delta > 0.0)) throw DomainError("grid spacing must be positive");
  Vec out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out[i] = delta * std::floor(y[i] / delta + 0.5);
  return out;
}

/// Cell centers lo + delta (k + 1/2) covering [lo, hi], first coordinate fastest.
template <class Callback>
std::int64_t for_each_box_cell(const Vec& lo, const Vec& hi, double delta, Callback&& cb) {
  if (!(delta > 0.0)) throw DomainError("grid spacing must be positive");
  detail::require_dims(lo.size() == hi.size(), "box corners differ in dimension");
  const Eigen::Index n = lo.size();
  std::vector<std::int64_t> counts(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(hi[i] > lo[i])) throw DomainError("box must have positive extent");
    counts[static_cast<std::size_t>(i)] =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((hi[i] - lo[i]) / delta - 1e-9)));
  }
  std::vector<std::int64_t> k(static_cast<std::size_t>(n), 0);
  Vec x(n);
  std::int64_t visited = 0;
  while (true) {
    for (Eigen::Index i = 0; i < n; ++i)
      x[i] = lo[i] + delta * (static_cast<double>(k[static_cast<std::size_t>(i)]) + 0.5);
    cb(static_cast<const Vec&>(x));
    ++visited;
    Eigen::Index i = 0;
    for (; i < n; ++i) {
      if (++k[static_cast<std::size_t>(i)] < counts[static_cast<std::size_t>(i)]) break;
      k[static_cast<std::size_t>(i)] = 0;
    }
    if (i == n) break;
  }
  return visited;
}

/// Calls cb(x) for every x = offset + delta k, k integer, with
/// (x - center)^T H (x - center) <= radius2. H must be positive definite.
/// Enumeration runs from the last coordinate inward (Fincke-Pohst), so the
/// visiting order is fixed by the inputs.
template <class Callback>
std::int64_t for_each_lattice_point_in_ellipsoid(const Mat& h, const Vec& center, const Vec& offset,
                                                 double delta, double radius2, Callback&& cb) {
  const Eigen::Index n = h.rows();
  detail::require_dims(h.cols() == n && center.size() == n && offset.size() == n,
                       "ellipsoid enumeration: dimension mismatch");
  if (!(delta > 0.0)) throw DomainError("grid spacing must be positive");
  Eigen::LLT<Mat> llt(h);
  if (llt.info() != Eigen::Success) throw DomainError("ellipsoid matrix is not positive definite");
  const Mat r = llt.matrixU();
  const Vec t = (center - offset) / delta;  // lattice coordinates of the center
  const double budget = radius2 / (delta * delta);

  std::vector<std::int64_t> k(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> k_hi(static_cast<std::size_t>(n), 0);
  std::vector<double> partial(static_cast<std::size_t>(n + 1), 0.0);  // quadratic form from coords > i
  Vec x = offset;
  std::int64_t visited = 0;

  // level i: choose k_i given k_{i+1..n-1}
  auto bounds = [&](Eigen::Index i, std::int64_t& lo, std::int64_t& hi) -> bool {
    double s = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j)
      s += r(i, j) * (static_cast<double>(k[static_cast<std::size_t>(j)]) - t[j]);
    const double rem = budget - partial[static_cast<std::size_t>(i + 1)];
    if (rem < 0.0) return false;
    const double c = t[i] - s / r(i, i);
    const double w = std::sqrt(rem) / r(i, i);
    lo = static_cast<std::int64_t>(std::ceil(c - w));
    hi = static_cast<std::int64_t>(std::floor(c + w));
    return lo <= hi;
  };
  auto contribution = [&](Eigen::Index i) {
    double s = 0.0;
    for (Eigen::Index j = i; j < n; ++j)
      s += r(i, j) * (static_cast<double>(k[static_cast<std::size_t>(j)]) - t[j]);
    return s * s;
  };

  Eigen::Index i = n - 1;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  if (!bounds(i, lo, hi)) return 0;
  k[static_cast<std::size_t>(i)] = lo;
  k_hi[static_cast<std::size_t>(i)] = hi;
  while (true) {
    const auto ui = static_cast<std::size_t>(i);
    if (k[ui] > k_hi[ui]) {
      if (i == n - 1) break;
      ++i;
      ++k[static_cast<std::size_t>(i)];
      continue;
    }
    partial[ui] = partial[ui + 1] + contribution(i);
    x[i] = offset[i] + delta * static_cast<double>(k[ui]);
    if (i == 0) {
      if (partial[0] <= budget) {
        cb(static_cast<const Vec&>(x));
        ++visited;
      }
      ++k[0];
      continue;
    }
    --i;
    if (bounds(i, lo, hi)) {
      k[static_cast<std::size_t>(i)] = lo;
      k_hi[static_cast<std::size_t>(i)] = hi;
    } else {
      ++i;
      ++k[static_cast<std::size_t>(i)];
    }
  }
  return visited;
}

}  // namespace ddinfer
