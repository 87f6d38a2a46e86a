#include "cdrstig/geo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string_view>

#include "cdrstig/error.hpp"
#include "cdrstig/text.hpp"

namespace cdrstig::geo {

namespace {

constexpr double kDegToRad = kPi / 180.0;

}  // namespace

bool GeoPoint::valid() const noexcept {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 &&
         lon >= -180.0 && lon <= 180.0;
}

double haversine(GeoPoint a, GeoPoint b) noexcept {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = (b.lat - a.lat) * kDegToRad;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

void GridSpec::validate() const {
  if (!origin.valid()) throw Error(ErrorCode::ConfigInvalid, "grid origin is not a valid point");
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m))
    throw Error(ErrorCode::ConfigInvalid, "grid cell size must be positive");
  if (n_rows <= 0 || n_cols <= 0)
    throw Error(ErrorCode::ConfigInvalid, "grid dimensions must be positive");
}

std::pair<double, double> to_local_xy(GeoPoint p, const GridSpec& spec) noexcept {
  const double x =
      kEarthRadiusM * (p.lon - spec.origin.lon) * kDegToRad * std::cos(spec.origin.lat * kDegToRad);
  const double y = kEarthRadiusM * (p.lat - spec.origin.lat) * kDegToRad;
  return {x, y};
}

Cell cell_of(GeoPoint p, const GridSpec& spec) noexcept {
  const auto [x, y] = to_local_xy(p, spec);
  const double col = std::floor(x / spec.cell_size_m);
  const double row = std::floor(y / spec.cell_size_m);
  constexpr double lo = std::numeric_limits<std::int32_t>::min();
  constexpr double hi = std::numeric_limits<std::int32_t>::max();
  return Cell{static_cast<std::int32_t>(std::clamp(row, lo, hi)),
              static_cast<std::int32_t>(std::clamp(col, lo, hi))};
}

std::optional<Cell> try_project(GeoPoint p, const GridSpec& spec) noexcept {
  const Cell c = cell_of(p, spec);
  if (!spec.contains(c)) return std::nullopt;
  return c;
}

Cell project(GeoPoint p, const GridSpec& spec) {
  if (auto c = try_project(p, spec)) return *c;
  throw Error(ErrorCode::OutOfBounds, "point (" + text::format_double(p.lat) + ", " +
                                          text::format_double(p.lon) + ") outside raster");
}

GeoPoint cell_center(Cell c, const GridSpec& spec) noexcept {
  const double x = (c.col + 0.5) * spec.cell_size_m;
  const double y = (c.row + 0.5) * spec.cell_size_m;
  const double lat = spec.origin.lat + y / kEarthRadiusM / kDegToRad;
  const double lon =
      spec.origin.lon + x / (kEarthRadiusM * std::cos(spec.origin.lat * kDegToRad)) / kDegToRad;
  return GeoPoint{lat, lon};
}

GridSpec bounding_grid(std::span<const GeoPoint> points, double cell_size_m,
                       std::int32_t pad_cells) {
  if (points.empty()) throw Error(ErrorCode::Empty, "bounding grid of an empty point set");
  double min_lat = points.front().lat, max_lat = min_lat;
  double min_lon = points.front().lon, max_lon = min_lon;
  for (const auto& p : points) {
    min_lat = std::min(min_lat, p.lat);
    max_lat = std::max(max_lat, p.lat);
    min_lon = std::min(min_lon, p.lon);
    max_lon = std::max(max_lon, p.lon);
  }
  // Anchor at the bounding box corner, then shift the origin back by the
  // padding so the projection keeps the anchor's latitude for its cosine.
  GridSpec spec;
  spec.cell_size_m = cell_size_m;
  spec.origin = GeoPoint{min_lat, min_lon};
  const double pad_m = pad_cells * cell_size_m;
  spec.origin.lat -= pad_m / kEarthRadiusM / kDegToRad;
  spec.origin.lon -= pad_m / (kEarthRadiusM * std::cos(spec.origin.lat * kDegToRad)) / kDegToRad;
  const auto [x, y] = to_local_xy(GeoPoint{max_lat, max_lon}, spec);
  spec.n_cols = static_cast<std::int32_t>(std::floor(x / cell_size_m)) + 1 + pad_cells;
  spec.n_rows = static_cast<std::int32_t>(std::floor(y / cell_size_m)) + 1 + pad_cells;
  return spec;
}

template <class T>
Grid<T>& Grid<T>::operator+=(const Grid& other) {
  if (!(spec_ == other.spec_)) throw Error(ErrorCode::GridMismatch, "grid specs differ");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] += other.cells_[i];
  return *this;
}

template class Grid<double>;
template class Grid<std::int64_t>;

void write_grid(const std::string& stem, const GridSpec& spec, std::span<const double> values,
                const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  if (values.size() != spec.cell_count())
    throw Error(ErrorCode::InvariantViolation, "grid value count does not match its spec");
  {
    std::ofstream out(stem + ".csv", std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open for writing: " + stem + ".csv");
    std::size_t i = 0;
    for (std::int32_t r = 0; r < spec.n_rows; ++r) {
      for (std::int32_t c = 0; c < spec.n_cols; ++c, ++i) {
        if (c) out.put(',');
        out << text::format_double(values[i]);
      }
      out.put('\n');
    }
    if (!out) throw Error(ErrorCode::Io, "write failed: " + stem + ".csv");
  }
  std::ofstream meta(stem + ".meta", std::ios::binary);
  if (!meta) throw Error(ErrorCode::Io, "cannot open for writing: " + stem + ".meta");
  meta << "origin_lat=" << text::format_double(spec.origin.lat) << '\n'
       << "origin_lon=" << text::format_double(spec.origin.lon) << '\n'
       << "cell_size_m=" << text::format_double(spec.cell_size_m) << '\n'
       << "n_rows=" << spec.n_rows << '\n'
       << "n_cols=" << spec.n_cols << '\n';
  for (const auto& [k, v] : extra_meta) meta << k << '=' << v << '\n';
  if (!meta) throw Error(ErrorCode::Io, "write failed: " + stem + ".meta");
}

LoadedGrid read_grid(const std::string& stem) {
  LoadedGrid g;
  const std::string meta = text::read_file(stem + ".meta");
  bool have[5] = {};
  for (auto line : text::split(meta, '\n')) {
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::MalformedRow, "bad metadata line in " + stem + ".meta");
    const auto key = line.substr(0, eq);
    const auto val = line.substr(eq + 1);
    double d = 0;
    std::int64_t n = 0;
    if (key == "origin_lat" && text::parse_double(val, d)) {
      g.spec.origin.lat = d;
      have[0] = true;
    } else if (key == "origin_lon" && text::parse_double(val, d)) {
      g.spec.origin.lon = d;
      have[1] = true;
    } else if (key == "cell_size_m" && text::parse_double(val, d)) {
      g.spec.cell_size_m = d;
      have[2] = true;
    } else if (key == "n_rows" && text::parse_int(val, n)) {
      g.spec.n_rows = static_cast<std::int32_t>(n);
      have[3] = true;
    } else if (key == "n_cols" && text::parse_int(val, n)) {
      g.spec.n_cols = static_cast<std::int32_t>(n);
      have[4] = true;
    } else {
      g.meta.emplace_back(std::string(key), std::string(val));
    }
  }
  if (!std::all_of(std::begin(have), std::end(have), [](bool b) { return b; }))
    throw Error(ErrorCode::MalformedRow, "incomplete grid metadata in " + stem + ".meta");
  g.spec.validate();

  const std::string body = text::read_file(stem + ".csv");
  g.values.reserve(g.spec.cell_count());
  std::int32_t rows = 0;
  for (auto line : text::split(body, '\n')) {
    line = text::chomp(line);
    if (line.empty()) continue;
    const auto fields = text::split(line, ',');
    if (static_cast<std::int32_t>(fields.size()) != g.spec.n_cols)
      throw Error(ErrorCode::MalformedRow, "grid row width mismatch in " + stem + ".csv");
    for (auto f : fields) {
      double d = 0;
      if (!text::parse_double(f, d) && f != "nan")
        throw Error(ErrorCode::MalformedRow, "bad grid value in " + stem + ".csv");
      g.values.push_back(d);
    }
    ++rows;
  }
  if (rows != g.spec.n_rows)
    throw Error(ErrorCode::MalformedRow, "grid row count mismatch in " + stem + ".csv");
  return g;
}

DistanceMatrix DistanceMatrix::min_max_normalized() const {
  DistanceMatrix out(n_);
  out.normalized_ = true;
  if (n_ < 2) return out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) {
      lo = std::min(lo, (*this)(i, j));
      hi = std::max(hi, (*this)(i, j));
    }
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double v = hi > lo ? ((*this)(i, j) - lo) / (hi - lo) : (hi > 0.0 ? 1.0 : 0.0);
      out.set(i, j, v);
    }
  return out;
}

DistanceMatrix district_distance_matrix(std::span<const GeoPoint> centroids, bool normalize) {
  const std::size_t n = centroids.size();
  if (n < 2) throw Error(ErrorCode::DegenerateGeometry, "need at least two districts");
  DistanceMatrix dm(n);
  double hi = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = haversine(centroids[i], centroids[j]);
      dm.set(i, j, d);
      hi = std::max(hi, d);
    }
  if (hi == 0.0) throw Error(ErrorCode::DegenerateGeometry, "all district centroids coincide");
  return normalize ? dm.min_max_normalized() : dm;
}

}  // namespace cdrstig::geo
