#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "cdrstig/cdr.hpp"
#include "cdrstig/geo.hpp"
#include "cdrstig/stigmergy.hpp"

namespace cdrstig::metrics {

using cdr::CallRecord;
using cdr::DistrictIndex;
using cdr::UserIndex;

// ---------------------------------------------------------------------------
// Interaction level

/// Share of calls directed to locals among calls to locals or refugees.
/// Records with an Unknown callee are ignored; Error(NoCalls) if none remain.
double interaction_level(std::span<const CallRecord> user_records);

inline constexpr int kIlBins = 5;

/// Left-closed 0.2-wide bins numbered 1..5; 1.0 falls in bin 5.
/// Error(OutOfRange) outside [0, 1].
int il_bin(double il);

inline double il_bin_midpoint(int bin) noexcept { return 0.2 * bin - 0.1; }

// ---------------------------------------------------------------------------
// Calling patterns

inline constexpr int kHours = 24;

struct CallingPattern {
  std::array<double, kHours> values{};   // mean over the 24 slots is 1
  std::array<bool, kHours> observed{};   // slot had at least one call
};

/// Calls per hour of day divided by the mean calls per hour.
/// Error(NoCalls) for an empty input.
CallingPattern calling_pattern(std::span<const CallRecord> records);

/// Unweighted mean of per-user patterns. Error(NoLocals) for no patterns.
CallingPattern local_average_pattern(std::span<const CallingPattern> patterns);

enum class CrMode {
  Zeros,             // unobserved hours count as zero calls
  PairwiseComplete,  // unobserved hours are dropped from both vectors
};

/// Cosine similarity between a user's pattern and the local average pattern.
/// Error(ZeroVector) when either vector is zero.
double calling_regularity(const CallingPattern& cp, const CallingPattern& lcp,
                          CrMode mode = CrMode::Zeros);

// ---------------------------------------------------------------------------
// Residence

/// Night window [20:00, 08:00) on the local clock.
inline bool is_night_hour(int hour) noexcept { return hour >= 20 || hour < 8; }

struct Residence {
  UserIndex user;
  int month = 1;  // calendar month 1..12
  DistrictIndex district;
  friend auto operator<=>(const Residence&, const Residence&) = default;
};

/// District of a record (antenna records map through the registry).
DistrictIndex district_of(const CallRecord& r, const cdr::Registry& registry);

/// Modal night-call district of one user's records for one month. Ties go to
/// the lexicographically smallest district id. nullopt without night calls.
std::optional<Residence> infer_residence(std::span<const CallRecord> user_records, UserIndex user,
                                         int month, const cdr::Registry& registry);

/// Residences of every caller of class `cls` for every calendar month.
std::vector<Residence> infer_residences(std::span<const CallRecord> records,
                                        const cdr::StudyYear& year,
                                        const cdr::Registry& registry,
                                        cdr::UserClass cls = cdr::UserClass::Refugee);

/// Users with at least `min_months` resolved residences, optionally counting
/// only residences inside `study_area`.
cdr::UserSet long_term_residents(std::span<const Residence> residences, int min_months = 6,
                                 const std::set<DistrictIndex>* study_area = nullptr);

// ---------------------------------------------------------------------------
// District metrics

struct NightCounts {
  std::int64_t refugee = 0;
  std::int64_t total = 0;
};

/// Night-time outgoing calls per (district, month) aggregated from traffic.
std::map<std::pair<DistrictIndex, int>, NightCounts> night_traffic(
    std::span<const cdr::TrafficRecord> traffic, const cdr::Registry& registry,
    const cdr::StudyYear& year);

/// Refugee share of the district's night calls in the month.
/// Error(NoNightTraffic) when the district has none.
double residential_inclusion(std::span<const cdr::TrafficRecord> traffic, DistrictIndex district,
                             int month, const cdr::Registry& registry, const cdr::StudyYear& year);

double residential_inclusion(const NightCounts& counts);

/// Share of the district's resident refugees in `month` still resident there
/// in `month + 1`. Error(LastMonth) when month + 1 > last_month,
/// Error(NoResidents) when nobody resided there.
double district_attractiveness(std::span<const Residence> residences, DistrictIndex district,
                               int month, int last_month = 12);

// ---------------------------------------------------------------------------
// Mobility similarity

/// Raster, engine and registry needed to turn call records into trails.
struct TrailContext {
  const cdr::Registry* registry = nullptr;
  stig::EngineConfig engine;
  geo::GridSpec raster;
};

/// Raster covering every registry antenna plus a mark radius of margin.
geo::GridSpec mobility_raster(const cdr::Registry& registry, const stig::EngineConfig& engine);

/// Trail of the group's calls on the day starting at `day_start`, compared at
/// the end of that day.
stig::Trail group_day_trail(const cdr::UserSet& group, std::span<const CallRecord> day_records,
                            cdr::Timestamp day_start, const TrailContext& ctx);

/// Similarity between the day trails of two equally sized groups.
/// Error(UnequalGroups) for different or zero sizes.
double mobility_similarity(const cdr::UserSet& refugee_group, const cdr::UserSet& local_group,
                           std::span<const CallRecord> day_records, cdr::Timestamp day_start,
                           const TrailContext& ctx);

/// Subsamples every group, without replacement, to the smallest group size.
/// Deterministic for a seed. Error(EmptyGroup) if any group is empty.
std::map<int, cdr::UserSet> subsample_equal_groups(const std::map<int, cdr::UserSet>& groups,
                                                   std::uint64_t seed);

/// Uniform subsample of `k` members; the whole set when k >= size.
cdr::UserSet subsample(const cdr::UserSet& users, std::size_t k, std::uint64_t seed);

}  // namespace cdrstig::metrics
