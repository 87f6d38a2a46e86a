#include "cdrstig/stats.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>

#include "cdrstig/error.hpp"

namespace cdrstig::stats {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::mt19937_64 make_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return std::mt19937_64(seq);
}

// Relative slack when comparing permuted statistics with the observed one,
// so that exact ties survive rounding.
constexpr double kTieSlack = 1e-12;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

}  // namespace

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson: unequal lengths");
  if (x.size() < 3) throw Error(ErrorCode::TooFewSamples, "pearson: need at least 3 samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw Error(ErrorCode::ZeroVariance, "pearson: zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          std::size_t n_perm, std::uint64_t seed) {
  CorrelationResult out;
  out.r = pearson_r(x, y);
  out.n = x.size();
  if (n_perm == 0) return out;

  const double mx = mean(x), my = mean(y);
  std::vector<double> xc(x.size()), yc(y.size());
  double sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xc[i] = x[i] - mx;
    yc[i] = y[i] - my;
    sxx += xc[i] * xc[i];
    syy += yc[i] * yc[i];
  }
  const double denom = std::sqrt(sxx * syy);
  const double threshold = std::abs(out.r) * (1.0 - kTieSlack);
  auto rng = make_rng(seed);
  std::size_t extreme = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    std::shuffle(yc.begin(), yc.end(), rng);
    double s = 0.0;
    for (std::size_t i = 0; i < xc.size(); ++i) s += xc[i] * yc[i];
    if (std::abs(s / denom) >= threshold) ++extreme;
  }
  out.p = static_cast<double>(1 + extreme) / static_cast<double>(n_perm + 1);
  return out;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "spearman: unequal lengths");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson_r(rx, ry);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw Error(ErrorCode::Empty, "mean of no values");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double quantile(std::span<const double> xs, double p) {
  if (xs.empty()) throw Error(ErrorCode::Empty, "quantile of no values");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorCode::OutOfRange, "quantile level outside [0, 1]");
  std::vector<double> s(xs.begin(), xs.end());
  std::sort(s.begin(), s.end());
  const double rank = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, s.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return s[lo] + frac * (s[hi] - s[lo]);
}

Quartiles quartiles(std::span<const double> xs) {
  return Quartiles{quantile(xs, 0.25), quantile(xs, 0.5), quantile(xs, 0.75)};
}

// ---------------------------------------------------------------------------

double dtw(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::Empty, "dtw of an empty series");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const double cost = std::abs(a[i - 1] - b[j - 1]);
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double series_distance(std::span<const double> a, std::span<const double> b,
                       SeriesMeasure measure) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::Empty, "distance of an empty series");
  if (measure == SeriesMeasure::Dtw) return dtw(a, b);
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "series lengths differ");
  if (measure == SeriesMeasure::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine of a zero series");
  return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
}

MinMaxResult min_max_normalize(std::span<const double> xs) {
  MinMaxResult out;
  out.values.assign(xs.size(), 0.0);
  if (xs.empty()) return out;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (!(*hi > *lo)) {
    out.constant = true;
    return out;
  }
  for (std::size_t i = 0; i < xs.size(); ++i) out.values[i] = (xs[i] - *lo) / (*hi - *lo);
  return out;
}

// ---------------------------------------------------------------------------

WeightMatrix row_standardized(WeightMatrix w) {
  w.zero_rows.clear();
  for (Eigen::Index i = 0; i < w.w.rows(); ++i) {
    const double s = w.w.row(i).sum();
    if (s > 0.0) w.w.row(i) /= s;
    else w.zero_rows.push_back(static_cast<std::size_t>(i));
  }
  w.row_standardized = true;
  return w;
}

WeightMatrix build_weight_matrix(const geo::DistanceMatrix& dm, WeightConstruction construction,
                                 bool row_standardize, double epsilon) {
  const std::size_t n = dm.size();
  if (n < 2) throw Error(ErrorCode::DegenerateGeometry, "weight matrix needs n >= 2");
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw Error(ErrorCode::ConfigInvalid, "inverse-distance epsilon must lie in (0, 1]");
  const geo::DistanceMatrix scaled = dm.normalized() ? dm : dm.min_max_normalized();
  bool any = false;
  for (std::size_t i = 0; i < n && !any; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && dm(i, j) > 0.0) any = true;
  if (!any) throw Error(ErrorCode::DegenerateGeometry, "all distances are zero");

  WeightMatrix out;
  out.construction = construction;
  out.w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = scaled(i, j);
      const double v = construction == WeightConstruction::MinMaxDistance
                           ? d
                           : 1.0 / (epsilon + (1.0 - epsilon) * d);
      out.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  return row_standardize ? row_standardized(std::move(out)) : out;
}

double morans_statistic(std::span<const double> values, const WeightMatrix& w) {
  const std::size_t n = values.size();
  if (n != w.size()) throw Error(ErrorCode::LengthMismatch, "values and weights differ in size");
  if (n < 4) throw Error(ErrorCode::TooFewSamples, "Moran's I needs n >= 4");
  const double s0 = w.total();
  if (!(s0 > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "all spatial weights are zero");
  const double m = mean(values);
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i)) = values[i] - m;
  const double zz = z.squaredNorm();
  if (!(zz > 0.0)) throw Error(ErrorCode::ZeroVariance, "Moran's I of a constant vector");
  return static_cast<double>(n) / s0 * z.dot(w.w * z) / zz;
}

MoranResult morans_i(std::span<const double> values, const WeightMatrix& w, std::size_t n_perm,
                     std::uint64_t seed) {
  MoranResult out;
  out.i = morans_statistic(values, w);
  const std::size_t n = values.size();
  out.expected = -1.0 / static_cast<double>(n - 1);
  if (n_perm == 0) return out;

  const double m = mean(values);
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) z(static_cast<Eigen::Index>(i)) = values[i] - m;
  const double scale = static_cast<double>(n) / w.total() / z.squaredNorm();
  const double observed = std::abs(out.i - out.expected) * (1.0 - kTieSlack);
  auto rng = make_rng(seed);
  std::size_t extreme = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    std::shuffle(z.data(), z.data() + z.size(), rng);
    const double ik = scale * z.dot(w.w * z);
    if (std::abs(ik - out.expected) >= observed) ++extreme;
  }
  out.p = static_cast<double>(1 + extreme) / static_cast<double>(n_perm + 1);
  return out;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd ols(std::span<const double> y, const Eigen::MatrixXd& x) {
  if (static_cast<Eigen::Index>(y.size()) != x.rows())
    throw Error(ErrorCode::LengthMismatch, "response and design differ in rows");
  const Eigen::MatrixXd z = with_intercept(x);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  if (qr.rank() < z.cols()) throw Error(ErrorCode::SingularDesign, "design matrix is rank deficient");
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  return qr.solve(yv);
}

SpatialModel spatial_lag_regress(std::span<const double> y, const Eigen::MatrixXd& x,
                                 const WeightMatrix& w, const LagFitOptions& options) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (x.rows() != n || w.w.rows() != n || w.w.cols() != n)
    throw Error(ErrorCode::LengthMismatch, "response, design and weights disagree in size");
  if (n <= x.cols() + 2)
    throw Error(ErrorCode::TooFewSamples, "spatial lag model needs n > predictors + 2");

  const Eigen::MatrixXd z = with_intercept(x);
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  if (qr.rank() < z.cols()) throw Error(ErrorCode::SingularDesign, "design matrix is rank deficient");

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::VectorXd wy = w.w * yv;
  const Eigen::VectorXd b0 = qr.solve(yv);
  const Eigen::VectorXd bl = qr.solve(wy);
  const Eigen::VectorXd e0 = yv - z * b0;
  const Eigen::VectorXd el = wy - z * bl;

  SpatialModel model;
  model.w = w;

  // log|I - rho W| = sum_i log|1 - rho lambda_i| over the eigenvalues of W.
  const Eigen::VectorXcd lambda = Eigen::EigenSolver<Eigen::MatrixXd>(w.w, false).eigenvalues();
  const auto log_likelihood = [&](double rho) {
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      const double m = std::abs(std::complex<double>(1.0) - rho * lambda(i));
      if (m < 1e-12) return std::optional<double>{};
      logdet += std::log(m);
    }
    const double sigma2 = (e0 - rho * el).squaredNorm() / static_cast<double>(n);
    if (!(sigma2 > 0.0)) return std::optional<double>{std::numeric_limits<double>::infinity()};
    return std::optional<double>{-0.5 * static_cast<double>(n) * std::log(sigma2) + logdet};
  };
  const auto objective = [&](double rho) {
    const auto ll = log_likelihood(rho);
    if (!ll) {
      ++model.skipped_probes;
      return kNegInf;
    }
    return *ll;
  };

  double rho = 0.0;
  if (w.total() > 0.0) {
    // Coarse scan to bracket the maximum (the profile can have several local
    // optima near singular points), then golden-section refinement.
    const double lo = -options.rho_bound, hi = options.rho_bound;
    constexpr int kScan = 80;
    double best_rho = 0.0, best_val = objective(0.0);
    std::vector<double> grid(kScan + 1);
    for (int i = 0; i <= kScan; ++i) {
      grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / kScan;
      const double v = objective(grid[static_cast<std::size_t>(i)]);
      if (v > best_val) {
        best_val = v;
        best_rho = grid[static_cast<std::size_t>(i)];
      }
    }
    double a = std::max(lo, best_rho - (hi - lo) / kScan);
    double b = std::min(hi, best_rho + (hi - lo) / kScan);
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = objective(c), fd = objective(d);
    while (b - a > options.tolerance) {
      if (fc >= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = objective(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = objective(d);
      }
    }
    const double refined = 0.5 * (a + b);
    rho = objective(refined) >= best_val ? refined : best_rho;
  }

  model.rho = rho;
  model.beta = b0 - rho * bl;
  const auto ll = log_likelihood(rho);
  model.log_likelihood = ll ? *ll : kNegInf;

  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * w.w;
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  model.fitted = lu.solve(z * model.beta);
  model.residuals = yv - model.fitted;
  model.mse = model.residuals.squaredNorm() / static_cast<double>(n);

  if (w.total() > 0.0 && n >= 4) {
    const auto moran_or_none = [&](const Eigen::VectorXd& v, std::uint64_t seed) {
      try {
        return std::optional<MoranResult>(
            morans_i(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), w,
                     options.n_perm, seed));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ZeroVariance) return std::optional<MoranResult>{};
        throw;
      }
    };
    model.moran_pred = moran_or_none(model.fitted, options.seed);
    model.moran_resid = moran_or_none(model.residuals, options.seed + 1);
  }
  return model;
}

}  // namespace cdrstig::stats
