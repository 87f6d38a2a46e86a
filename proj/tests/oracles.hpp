#pragma once

// Straightforward reference implementations used as test oracles. They share
// no code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

struct Sample {
  std::int32_t row = 0, col = 0;
  std::int64_t step = 0;
};

inline double cone(double d, double base, double top, double peak) {
  if (d <= top) return peak;
  if (d >= base) return 0.0;
  return peak * (base - d) / (base - top);
}

/// Per-cell simulation: for every step, decay every cell, then add every mark
/// of that step by scanning the whole raster.
inline std::vector<double> trail(const std::vector<Sample>& samples, std::int64_t first, std::int64_t last,
                                 double delta, bool multiplicative, double base, double top, double peak,
                                 double cell_m, int rows, int cols) {
  std::vector<double> v(static_cast<std::size_t>(rows * cols), 0.0);
  for (std::int64_t t = first; t <= last; ++t) {
    for (double& x : v) x = multiplicative ? x * (1.0 - delta) : std::max(0.0, x - delta);
    for (const auto& s : samples) {
      if (s.step != t) continue;
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          const double d = cell_m * std::sqrt(double(r - s.row) * (r - s.row) + double(c - s.col) * (c - s.col));
          v[static_cast<std::size_t>(r * cols + c)] += cone(d, base, top, peak);
        }
    }
  }
  return v;
}

inline double jaccard(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    lo += std::min(a[i], b[i]);
    hi += std::max(a[i], b[i]);
  }
  return lo / hi;
}

/// Minimum cost over every monotone warping path, by exhaustive recursion.
inline double dtw_paths(const std::vector<double>& a, const std::vector<double>& b, std::size_t i = 0,
                        std::size_t j = 0) {
  const double here = std::abs(a[i] - b[j]);
  if (i + 1 == a.size() && j + 1 == b.size()) return here;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, dtw_paths(a, b, i + 1, j));
  if (j + 1 < b.size()) best = std::min(best, dtw_paths(a, b, i, j + 1));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, dtw_paths(a, b, i + 1, j + 1));
  return here + best;
}

/// Pearson r written out from the definition in long double.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace oracle
