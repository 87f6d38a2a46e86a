#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cdrstig/cdr.hpp"
#include "cdrstig/geo.hpp"

namespace cdrstig::geo {

inline constexpr double kActivityCellSizeM = 10'000.0;

enum class DurationVariant { Refugee, Total };

template <class T>
struct GridResult {
  Grid<T> grid;
  std::size_t out_of_bounds = 0;  // lenient mode only
};

/// Cumulative call duration (seconds) per cell, keyed by the outgoing
/// antenna's position. Strict mode throws Error(OutOfBounds) for an antenna
/// outside the raster; lenient mode skips and counts it.
GridResult<double> activity_grid(std::span<const cdr::TrafficRecord> traffic,
                                 const cdr::Registry& registry, const GridSpec& spec,
                                 DurationVariant variant = DurationVariant::Refugee,
                                 cdr::Strictness strictness = cdr::Strictness::Strict);

/// Number of registry antennas per cell.
GridResult<std::int64_t> antenna_density_grid(const cdr::Registry& registry, const GridSpec& spec,
                                              cdr::Strictness strictness = cdr::Strictness::Strict);

/// Default raster for country/city overviews: the registry's bounding box
/// padded by one cell.
GridSpec registry_grid(const cdr::Registry& registry, double cell_size_m = kActivityCellSizeM);

}  // namespace cdrstig::geo
