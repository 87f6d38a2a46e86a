#include <cmath>
#include <random>

#include "cdrstig/error.hpp"
#include "cdrstig/geo.hpp"
#include "cdrstig/grids.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cdrstig;
using namespace cdrstig::geo;

namespace {

GeoPoint east_of(GeoPoint o, double m) {
  return {o.lat, o.lon + m / (kEarthRadiusM * std::cos(o.lat * kPi / 180.0)) * 180.0 / kPi};
}

GeoPoint north_of(GeoPoint o, double m) { return {o.lat + m / kEarthRadiusM * 180.0 / kPi, o.lon}; }

cdr::TrafficRecord traffic(std::uint32_t out, std::int64_t refugee_s, std::int64_t total_s) {
  cdr::TrafficRecord r;
  r.out_antenna = cdr::AntennaIndex{out};
  r.total_calls = 1;
  r.refugee_calls = refugee_s > 0;
  r.refugee_duration_s = refugee_s;
  r.total_duration_s = total_s;
  return r;
}

}  // namespace

TEST_CASE("haversine") {
  const GeoPoint a{0, 0}, b{1, 0};
  CHECK(haversine(a, a) == 0.0);
  // one degree of arc: pi * R / 180
  CHECK(haversine(a, b) == doctest::Approx(kPi * kEarthRadiusM / 180.0).epsilon(1e-12));
  CHECK(std::abs(haversine(a, b) - 111'195.0) < 1.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> lat(-80, 80), lon(-179, 179);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint p{lat(rng), lon(rng)}, q{lat(rng), lon(rng)};
    CHECK(haversine(p, q) == doctest::Approx(haversine(q, p)).epsilon(1e-14));
    CHECK(haversine(p, q) >= 0.0);
  }
}

TEST_CASE("projection onto a raster") {
  const GridSpec spec{{41.0, 29.0}, 100.0, 50, 60};
  CHECK(project(spec.origin, spec) == Cell{0, 0});
  CHECK(project(east_of(spec.origin, 250.0), spec) == Cell{0, 2});
  CHECK(project(north_of(spec.origin, 1'050.0), spec) == Cell{10, 0});
  CHECK_THROWS_AS(project(east_of(spec.origin, -10.0), spec), Error);
  CHECK_FALSE(try_project(east_of(spec.origin, -10.0), spec));
  CHECK_FALSE(try_project(east_of(spec.origin, 6'050.0), spec));

  // cell centers project back to their own cell
  for (std::int32_t r = 0; r < spec.n_rows; r += 7)
    for (std::int32_t c = 0; c < spec.n_cols; c += 5) CHECK(project(cell_center({r, c}, spec), spec) == Cell{r, c});

  // equirectangular error stays small at city scale
  const GeoPoint far = east_of(north_of(spec.origin, 30'000.0), 40'000.0);
  const auto [x, y] = to_local_xy(far, spec);
  CHECK(std::hypot(x, y) == doctest::Approx(haversine(spec.origin, far)).epsilon(0.005));
}

TEST_CASE("bounding grid covers its points") {
  std::vector<GeoPoint> pts{{41.0, 29.0}, {41.2, 29.3}, {41.05, 28.9}};
  const auto spec = bounding_grid(pts, 1'000.0, 1);
  for (const auto& p : pts) {
    const auto c = try_project(p, spec);
    REQUIRE(c);
    CHECK(c->row >= 1);
    CHECK(c->col >= 1);
    CHECK(c->row < spec.n_rows - 1);
    CHECK(c->col < spec.n_cols - 1);
  }
  CHECK_THROWS_AS(bounding_grid(std::vector<GeoPoint>{}, 1'000.0), Error);
}

TEST_CASE("activity and density grids") {
  cdr::Registry reg;
  const GridSpec spec{{41.0, 29.0}, 10'000.0, 4, 4};
  reg.add_antenna("A1", east_of(north_of(spec.origin, 15'000), 15'000), "D1");
  reg.add_antenna("A2", east_of(north_of(spec.origin, 16'000), 17'000), "D1");
  reg.add_antenna("A3", east_of(north_of(spec.origin, 5'000), 35'000), "D2");
  reg.add_antenna("A4", east_of(north_of(spec.origin, 5'000), 55'000), "D2");  // outside

  SUBCASE("single deposit") {
    const std::vector<cdr::TrafficRecord> t{traffic(0, 100, 150)};
    const auto g = activity_grid(t, reg, spec).grid;
    CHECK(g.at({1, 1}) == 100.0);
    double sum = 0;
    for (double v : g.values()) sum += v;
    CHECK(sum == 100.0);
    CHECK(activity_grid(t, reg, spec, DurationVariant::Total).grid.at({1, 1}) == 150.0);
  }
  SUBCASE("same cell is additive, concatenation is additive") {
    const std::vector<cdr::TrafficRecord> a{traffic(0, 40, 40)}, b{traffic(1, 60, 60), traffic(2, 5, 5)};
    std::vector<cdr::TrafficRecord> ab(a);
    ab.insert(ab.end(), b.begin(), b.end());
    auto ga = activity_grid(a, reg, spec).grid;
    const auto gb = activity_grid(b, reg, spec).grid;
    const auto gab = activity_grid(ab, reg, spec).grid;
    CHECK(gab.at({1, 1}) == 100.0);
    ga += gb;
    CHECK(ga == gab);
  }
  SUBCASE("empty traffic") {
    const auto g = activity_grid({}, reg, spec).grid;
    for (double v : g.values()) CHECK(v == 0.0);
  }
  SUBCASE("out of bounds: strict throws, lenient counts") {
    const std::vector<cdr::TrafficRecord> t{traffic(3, 10, 10)};
    CHECK_THROWS_AS(activity_grid(t, reg, spec), Error);
    CHECK(activity_grid(t, reg, spec, DurationVariant::Refugee, cdr::Strictness::Lenient).out_of_bounds == 1);
  }
  SUBCASE("antenna density") {
    const auto d = antenna_density_grid(reg, spec, cdr::Strictness::Lenient);
    CHECK(d.grid.at({1, 1}) == 2);
    CHECK(d.out_of_bounds == 1);
    std::int64_t total = 0;
    for (auto v : d.grid.values()) total += v;
    CHECK(total + 1 == 4);

    cdr::Registry three;
    for (int i = 0; i < 3; ++i)
      three.add_antenna("B" + std::to_string(i), east_of(north_of(spec.origin, 100 + i), 100), "D1");
    CHECK(antenna_density_grid(three, spec).grid.at({0, 0}) == 3);
    const auto empty = antenna_density_grid(cdr::Registry{}, spec);
    for (auto v : empty.grid.values()) CHECK(v == 0);
  }
}

TEST_CASE("grid dump round trip") {
  testutil::TempDir dir;
  const GridSpec spec{{41.0, 29.0}, 250.0, 3, 4};
  std::vector<double> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i) + 1e-17;
  write_grid(dir.file("g"), spec, v, {{"kind", "test"}});
  const auto back = read_grid(dir.file("g"));
  CHECK(back.spec == spec);
  CHECK(back.values == v);
}

TEST_CASE("district distance matrix") {
  DistanceMatrix dm(3);
  dm.set(0, 1, 5'000);
  dm.set(0, 2, 10'000);
  dm.set(1, 2, 15'000);
  const auto n = dm.min_max_normalized();
  CHECK(n(0, 1) == 0.0);
  CHECK(n(0, 2) == 0.5);
  CHECK(n(1, 2) == 1.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(n(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) CHECK(n(i, j) == n(j, i));
  }

  DistanceMatrix eq(3);
  eq.set(0, 1, 7);
  eq.set(0, 2, 7);
  eq.set(1, 2, 7);
  CHECK(eq.min_max_normalized()(1, 2) == 1.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  std::vector<GeoPoint> c;
  for (int i = 0; i < 12; ++i) c.push_back({41.0 + jitter(rng), 29.0 + jitter(rng)});
  const auto raw = district_distance_matrix(c, false);
  const auto norm = district_distance_matrix(c, true);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      for (std::size_t k = 0; k < 12; ++k)
        for (std::size_t l = 0; l < 12; ++l)
          if (i != j && k != l && raw(i, j) < raw(k, l)) CHECK(norm(i, j) <= norm(k, l));
  CHECK_THROWS_AS(district_distance_matrix(std::vector<GeoPoint>{{41, 29}}, true), Error);
  CHECK_THROWS_AS(district_distance_matrix(std::vector<GeoPoint>{{41, 29}, {41, 29}}, true), Error);
}
