#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cdrstig::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;

struct GeoPoint {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  bool valid() const noexcept;
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Great-circle distance in meters.
double haversine(GeoPoint a, GeoPoint b) noexcept;

struct Cell {
  std::int32_t row = 0;
  std::int32_t col = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Regular raster laid over a local equirectangular projection anchored at
/// the south-west corner. Row 0 is the southernmost row, column 0 the
/// westernmost column.
struct GridSpec {
  GeoPoint origin;
  double cell_size_m = 100.0;
  std::int32_t n_rows = 0;
  std::int32_t n_cols = 0;

  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols);
  }
  bool contains(Cell c) const noexcept {
    return c.row >= 0 && c.col >= 0 && c.row < n_rows && c.col < n_cols;
  }
  std::size_t offset(Cell c) const noexcept {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(n_cols) +
           static_cast<std::size_t>(c.col);
  }
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Projected east/north offset of `p` from the grid origin, in meters.
std::pair<double, double> to_local_xy(GeoPoint p, const GridSpec& spec) noexcept;

/// Cell containing `p` without any bounds check (may be negative or beyond
/// the raster). Points on a cell's east/north edge belong to the next cell.
Cell cell_of(GeoPoint p, const GridSpec& spec) noexcept;

/// Cell containing `p`, or nullopt when it falls outside the raster.
std::optional<Cell> try_project(GeoPoint p, const GridSpec& spec) noexcept;

/// Cell containing `p`; throws Error(OutOfBounds) outside the raster.
Cell project(GeoPoint p, const GridSpec& spec);

/// Geographic position of the center of cell `c`.
GeoPoint cell_center(Cell c, const GridSpec& spec) noexcept;

/// Smallest grid of `cell_size_m` cells covering `points`, padded by
/// `pad_cells` on every side. Throws Error(Empty) for no points.
GridSpec bounding_grid(std::span<const GeoPoint> points, double cell_size_m,
                       std::int32_t pad_cells = 1);

/// Dense row-major raster of values.
template <class T>
class Grid {
 public:
  Grid() = default;
  explicit Grid(GridSpec spec, T fill = T{}) : spec_(spec), cells_(spec.cell_count(), fill) {}

  const GridSpec& spec() const noexcept { return spec_; }
  T& at(Cell c) { return cells_[spec_.offset(c)]; }
  const T& at(Cell c) const { return cells_[spec_.offset(c)]; }
  std::span<T> values() noexcept { return cells_; }
  std::span<const T> values() const noexcept { return cells_; }

  /// Cell-wise sum; both grids must share a spec.
  Grid& operator+=(const Grid& other);

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  GridSpec spec_;
  std::vector<T> cells_;
};

/// Writes `<stem>.csv` (one line per grid row, row 0 first) and `<stem>.meta`
/// (key=value lines). `extra_meta` lines are appended to the sidecar.
void write_grid(const std::string& stem, const GridSpec& spec, std::span<const double> values,
                const std::vector<std::pair<std::string, std::string>>& extra_meta = {});

struct LoadedGrid {
  GridSpec spec;
  std::vector<double> values;
  std::vector<std::pair<std::string, std::string>> meta;
};
LoadedGrid read_grid(const std::string& stem);

/// Symmetric pairwise district distances with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n) : n_(n), d_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    d_[i * n_ + j] = v;
    d_[j * n_ + i] = v;
  }
  bool normalized() const noexcept { return normalized_; }

  /// Min-max scaling of the off-diagonal entries onto [0, 1]. When every
  /// off-diagonal entry is equal (and non-zero) they all map to 1.
  DistanceMatrix min_max_normalized() const;

 private:
  std::size_t n_ = 0;
  std::vector<double> d_;
  bool normalized_ = false;
};

/// Pairwise haversine distances between centroids; optionally min-max scaled.
/// Throws Error(DegenerateGeometry) when n < 2 or all centroids coincide.
DistanceMatrix district_distance_matrix(std::span<const GeoPoint> centroids, bool normalize);

}  // namespace cdrstig::geo
