#include "cdrstig/grids.hpp"

#include "cdrstig/error.hpp"

namespace cdrstig::geo {

GridResult<double> activity_grid(std::span<const cdr::TrafficRecord> traffic,
                                 const cdr::Registry& registry, const GridSpec& spec,
                                 DurationVariant variant, cdr::Strictness strictness) {
  spec.validate();
  GridResult<double> out{Grid<double>(spec, 0.0), 0};
  // Project each antenna once; traffic tables are much longer than the registry.
  std::vector<std::optional<Cell>> cells(registry.antenna_count());
  for (std::size_t i = 0; i < registry.antenna_count(); ++i)
    cells[i] = try_project(registry.antennas()[i].location, spec);

  for (const auto& r : traffic) {
    const auto& cell = cells.at(r.out_antenna.value);
    if (!cell) {
      if (strictness == cdr::Strictness::Strict)
        throw Error(ErrorCode::OutOfBounds,
                    "antenna '" + registry.antenna(r.out_antenna).id + "' outside activity grid");
      ++out.out_of_bounds;
      continue;
    }
    out.grid.at(*cell) += static_cast<double>(
        variant == DurationVariant::Refugee ? r.refugee_duration_s : r.total_duration_s);
  }
  return out;
}

GridResult<std::int64_t> antenna_density_grid(const cdr::Registry& registry, const GridSpec& spec,
                                              cdr::Strictness strictness) {
  spec.validate();
  GridResult<std::int64_t> out{Grid<std::int64_t>(spec, 0), 0};
  for (const auto& a : registry.antennas()) {
    const auto cell = try_project(a.location, spec);
    if (!cell) {
      if (strictness == cdr::Strictness::Strict)
        throw Error(ErrorCode::OutOfBounds, "antenna '" + a.id + "' outside density grid");
      ++out.out_of_bounds;
      continue;
    }
    ++out.grid.at(*cell);
  }
  return out;
}

GridSpec registry_grid(const cdr::Registry& registry, double cell_size_m) {
  std::vector<GeoPoint> pts;
  pts.reserve(registry.antenna_count());
  for (const auto& a : registry.antennas()) pts.push_back(a.location);
  return bounding_grid(pts, cell_size_m, 1);
}

}  // namespace cdrstig::geo
