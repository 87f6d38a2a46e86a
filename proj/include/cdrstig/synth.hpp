#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdrstig/cdr.hpp"
#include "cdrstig/dataset.hpp"
#include "cdrstig/geo.hpp"

namespace cdrstig::synth {

/// Districts on a jittered square lattice. Each district has residential and
/// hotspot antennas near its centroid (used by locals) and enclave antennas on
/// an outer ring (used by refugees), kept far enough apart that their marks
/// do not touch.
struct CityConfig {
  int grid_rows = 5;
  int grid_cols = 5;
  double spacing_m = 6'000.0;
  double jitter_m = 300.0;
  int residential_per_district = 3;
  int hotspots_per_district = 2;
  int enclaves_per_district = 2;
  double core_radius_m = 1'000.0;      // residential + hotspot antennas
  double enclave_radius_m = 2'500.0;   // enclave ring radius
  double enclave_clearance_m = 1'200.0;
  geo::GeoPoint center{41.0, 29.0};
  double rent_min = 10.0;
  double rent_max = 40.0;
  int rent_tiers = 4;  // ring tiers used for reporting; rent itself is continuous

  int n_districts() const noexcept { return grid_rows * grid_cols; }
  void validate() const;
};

struct PopulationConfig {
  int n_locals = 1'000;
  int n_refugees = 1'000;
  double kappa_mobility = 0.9;
  double kappa_routine = 0.9;
  double kappa_cost = 0.8;

  double active_share = 0.9;        // users whose daily rate clears the activity filter
  double active_rate_floor = 2.5;   // calls/day
  double active_rate_extra = 1.5;   // mean of the exponential excess
  double inactive_rate_min = 0.5;
  double inactive_rate_max = 2.0;

  double unknown_callee_share = 0.009;
  double local_to_local = 0.98;
  double residential_day_share = 0.05;  // refugee personal day spot is a residential antenna
  double affordability_bandwidth = 0.15;
  double move_base = 0.05;   // monthly
  double move_cost_gain = 0.3;
  double mean_duration_s = 120.0;
  // Control plant: every refugee replays the first refugee's times and
  // antennas; only callee classes still follow each user's il_target.
  bool shared_refugee_trace = false;

  void validate() const;
};

struct EventConfig {
  cdr::Timestamp date = 0;  // midnight of the event day
  double severity = 0.0;
  double low_il_multiplier = 0.0;

  void validate() const;
  /// Persistent multiplier applied to a refugee's hotspot probability on days
  /// after the event.
  double factor(double il_target) const noexcept;
};

struct SynthConfig {
  CityConfig city;
  PopulationConfig population;
  std::vector<EventConfig> events;
  int year = 2017;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruthRow {
  std::string user_id;
  double il_target = 0.0;
  std::string home_district;  // January home
  double routine_weight = 0.0;  // share of the local hourly profile
  double hotspot_probability = 0.0;  // before any event
  double daily_rate = 0.0;
};

struct SynthData {
  Dataset dataset;
  std::vector<GroundTruthRow> truth;  // refugees in id order
};

/// Deterministic for a given config (seed included). Errors: ConfigInvalid.
SynthData generate(const SynthConfig& config);

/// Writes fgmd.csv, cgmd.csv, atd.csv, antennas.csv, districts.csv and
/// ground_truth.csv into `dir` (created if needed).
void write_synth(const SynthData& data, const std::string& dir);

/// Input paths of a directory written by write_synth.
InputPaths synth_paths(const std::string& dir);

/// Writes the ground-truth table (user_id,il_target,home_district).
void write_ground_truth(std::span<const GroundTruthRow> rows, const std::string& path);

struct ConsistencyReport {
  std::size_t antenna_hours = 0;  // distinct (out antenna, hour) keys compared
};

/// Checks that ATD call totals per outgoing antenna and hour equal the FGMD
/// aggregation. Error(Inconsistent) names the first offending antenna-hour.
ConsistencyReport consistency_check(std::span<const cdr::CallRecord> fgmd,
                                    std::span<const cdr::TrafficRecord> atd,
                                    const cdr::Registry& registry);

/// Hourly call profiles (sum 1) the generator mixes.
std::array<double, 24> local_profile();
std::array<double, 24> refugee_profile();

}  // namespace cdrstig::synth
