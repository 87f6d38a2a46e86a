#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdrstig/geo.hpp"

namespace cdrstig::stig {

/// Truncated-cone mark: full `peak` intensity out to `top_radius_m`, then a
/// linear ramp down to zero at `base_radius_m`.
struct MarkSpec {
  double base_radius_m = 500.0;
  double top_radius_m = 250.0;
  double peak = 1.0;

  void validate() const;
};

/// Intensity of a mark at `distance_m` from its center; 0 at or beyond the
/// base radius.
double mark_intensity(double distance_m, const MarkSpec& mark) noexcept;

enum class EvaporationMode { Multiplicative, Subtractive };

struct EvaporationPolicy {
  double delta = 0.10;
  EvaporationMode mode = EvaporationMode::Multiplicative;

  void validate() const;
  double apply(double v) const noexcept {
    return mode == EvaporationMode::Multiplicative ? v * (1.0 - delta)
                                                   : (v > delta ? v - delta : 0.0);
  }
};

struct SampleEvent {
  geo::GeoPoint point;
  std::int64_t step = 0;
};

struct CellIntensity {
  geo::Cell cell;
  double intensity = 0.0;
};

/// Precomputed mark stencil for one raster resolution. Distances are measured
/// between cell centers.
class Footprint {
 public:
  struct Offset {
    std::int32_t dr = 0;
    std::int32_t dc = 0;
    double intensity = 0.0;
  };

  Footprint(const MarkSpec& mark, double cell_size_m);

  std::span<const Offset> offsets() const noexcept { return offsets_; }
  std::int32_t reach() const noexcept { return reach_; }

 private:
  std::vector<Offset> offsets_;
  std::int32_t reach_ = 0;
};

/// Cells (inside the raster) covered by a mark centered on `center`.
std::vector<CellIntensity> mark_footprint(geo::Cell center, const MarkSpec& mark,
                                          const geo::GridSpec& spec);

/// Non-negative scalar field over a raster at a given time step.
class Trail {
 public:
  Trail() = default;
  explicit Trail(const geo::GridSpec& spec, std::int64_t clock = 0);

  const geo::GridSpec& spec() const noexcept { return spec_; }
  std::int64_t clock() const noexcept { return clock_; }
  std::span<const double> values() const noexcept { return values_; }
  double at(geo::Cell c) const { return values_[spec_.offset(c)]; }

  /// Adds `weight` times the stencil centered on `center`, clipped at the edge.
  void deposit(geo::Cell center, const Footprint& footprint, double weight = 1.0);
  /// One evaporation application to every cell.
  void evaporate(const EvaporationPolicy& policy);
  void set_clock(std::int64_t clock) noexcept { clock_ = clock; }
  /// Multiplies every cell by k >= 0.
  void scale(double k);

  /// Row/column bounds outside of which every cell is zero.
  struct Box {
    std::int32_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // half-open
    bool empty() const noexcept { return r0 >= r1 || c0 >= c1; }
  };
  Box active() const noexcept { return active_; }

 private:
  geo::GridSpec spec_;
  std::vector<double> values_;
  std::int64_t clock_ = 0;
  Box active_;
};

/// Inclusive range of time steps.
struct StepWindow {
  std::int64_t first = 0;
  std::int64_t last = 0;

  std::int64_t length() const noexcept { return last - first + 1; }
};

/// Advances the trail by one step: evaporate every cell, then add the
/// footprints of all `deposits`, which must carry step == clock + 1
/// (Error(StepMismatch) otherwise).
Trail step(Trail trail, std::span<const SampleEvent> deposits, const EvaporationPolicy& policy,
           const MarkSpec& mark);

/// Trail at `window.last` obtained by stepping an empty trail through every
/// step of the window. Samples outside the window throw Error(StepMismatch).
Trail build_trail(std::span<const SampleEvent> samples, StepWindow window,
                  const EvaporationPolicy& policy, const MarkSpec& mark,
                  const geo::GridSpec& spec);

/// Samples already projected to raster cells (cells may lie outside the
/// raster; their footprints are clipped).
struct CellSample {
  geo::Cell cell;
  std::int64_t step = 0;
};

Trail build_trail(std::span<const CellSample> samples, StepWindow window,
                  const EvaporationPolicy& policy, const Footprint& footprint,
                  const geo::GridSpec& spec);

/// Extended Jaccard: sum of cell-wise minima over sum of cell-wise maxima.
/// Error(GridMismatch) for different rasters, Error(BothTrailsEmpty) when
/// both trails are zero everywhere.
double trail_similarity(const Trail& a, const Trail& b);

/// Sum of all cell values.
double trail_volume(const Trail& t) noexcept;

/// Engine parameters shared by every trail of an analysis.
struct EngineConfig {
  MarkSpec mark;
  EvaporationPolicy policy;
  double cell_size_m = 100.0;
  std::int64_t step_seconds = 3'600;

  void validate() const;
};

/// Time step containing local timestamp `ts` (seconds).
inline std::int64_t step_of(std::int64_t ts, std::int64_t step_seconds) noexcept {
  const std::int64_t q = ts / step_seconds;
  return (ts % step_seconds < 0) ? q - 1 : q;
}

/// Writes the trail with the grid dump format plus `clock` in the sidecar.
void write_trail(const std::string& stem, const Trail& trail);

}  // namespace cdrstig::stig
