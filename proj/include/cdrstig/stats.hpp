#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cdrstig/geo.hpp"

namespace cdrstig::stats {

// ---------------------------------------------------------------------------
// Correlation

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;  // two-sided permutation p-value
  std::size_t n = 0;
};

/// Product-moment correlation. Errors: LengthMismatch, TooFewSamples (n < 3),
/// ZeroVariance.
double pearson_r(std::span<const double> x, std::span<const double> y);

/// Pearson r with a permutation p-value: y is shuffled `n_perm` times and
/// p = (1 + #{|r_perm| >= |r|}) / (n_perm + 1).
CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          std::size_t n_perm = 10'000, std::uint64_t seed = 0);

/// Spearman rank correlation (average ranks for ties); no p-value.
double spearman_r(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Order statistics

/// Linear interpolation between order statistics at rank p * (n - 1).
/// Error(Empty) for no data.
double quantile(std::span<const double> xs, double p);

struct Quartiles {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0;
};
Quartiles quartiles(std::span<const double> xs);

double mean(std::span<const double> xs);

// ---------------------------------------------------------------------------
// Series distances

enum class SeriesMeasure { Euclidean, Cosine, Dtw };

/// Minimal cumulative |a_i - b_j| over all monotone warping paths, no window.
double dtw(std::span<const double> a, std::span<const double> b);

/// Euclidean: l2 norm of the difference; Cosine: 1 - cosine similarity
/// (Error(ZeroVector) for a zero series); Dtw: see dtw(). Euclidean and
/// Cosine need equal lengths.
double series_distance(std::span<const double> a, std::span<const double> b,
                       SeriesMeasure measure);

// ---------------------------------------------------------------------------
// Normalization

struct MinMaxResult {
  std::vector<double> values;
  bool constant = false;  // input had max == min; values are all zero
};

MinMaxResult min_max_normalize(std::span<const double> xs);

// ---------------------------------------------------------------------------
// Spatial statistics

enum class WeightConstruction {
  // Min-max scaled distances used directly as weights. Note that far pairs
  // get the largest weights.
  MinMaxDistance,
  // 1 / d' with d' the min-max scaled distance mapped onto [epsilon, 1]:
  // near pairs get the largest weights.
  InverseDistance,
};

struct WeightMatrix {
  Eigen::MatrixXd w;
  WeightConstruction construction = WeightConstruction::MinMaxDistance;
  bool row_standardized = false;
  std::vector<std::size_t> zero_rows;  // rows left all-zero by standardization

  std::size_t size() const noexcept { return static_cast<std::size_t>(w.rows()); }
  double total() const { return w.sum(); }
};

WeightMatrix build_weight_matrix(const geo::DistanceMatrix& dm, WeightConstruction construction,
                                 bool row_standardize, double epsilon = 0.1);

/// Divides each row by its sum; all-zero rows stay zero and are recorded.
WeightMatrix row_standardized(WeightMatrix w);

struct MoranResult {
  double i = 0.0;
  double p = 1.0;
  double expected = 0.0;  // -1 / (n - 1)
};

/// Moran's I of `values` under `w`. Errors: TooFewSamples (n < 4),
/// ZeroVariance, DegenerateGeometry (all weights zero), LengthMismatch.
double morans_statistic(std::span<const double> values, const WeightMatrix& w);

/// Moran's I with a two-sided permutation p-value around -1/(n-1).
MoranResult morans_i(std::span<const double> values, const WeightMatrix& w,
                     std::size_t n_perm = 10'000, std::uint64_t seed = 0);

struct SpatialModel {
  double rho = 0.0;
  Eigen::VectorXd beta;  // intercept first, then one per predictor column
  double mse = 0.0;
  double log_likelihood = 0.0;
  WeightMatrix w;
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  std::optional<MoranResult> moran_pred;
  std::optional<MoranResult> moran_resid;
  std::size_t skipped_probes = 0;  // rho values where I - rho W was singular
};

struct LagFitOptions {
  double rho_bound = 0.999;
  double tolerance = 1e-6;
  std::size_t n_perm = 10'000;
  std::uint64_t seed = 0;
};

/// Maximum-likelihood fit of y = rho W y + [1 X] beta + e. rho maximizes the
/// concentrated log-likelihood over (-bound, bound); beta is the least
/// squares solution for (I - rho W) y. Fitted values are
/// (I - rho W)^-1 [1 X] beta. Errors: TooFewSamples (n <= k + 2),
/// SingularDesign, LengthMismatch.
SpatialModel spatial_lag_regress(std::span<const double> y, const Eigen::MatrixXd& x,
                                 const WeightMatrix& w, const LagFitOptions& options = {});

/// Ordinary least squares with an intercept column; coefficients intercept first.
Eigen::VectorXd ols(std::span<const double> y, const Eigen::MatrixXd& x);

}  // namespace cdrstig::stats
