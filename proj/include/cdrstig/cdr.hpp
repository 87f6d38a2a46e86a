#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cdrstig/geo.hpp"

namespace cdrstig::cdr {

// ---------------------------------------------------------------------------
// Identifiers

/// Dense index into one of the id tables. Distinct tags keep user, antenna
/// and district indices from being mixed up.
template <class Tag>
struct Index {
  std::uint32_t value = 0;
  friend auto operator<=>(const Index&, const Index&) = default;
};

using UserIndex = Index<struct UserTag>;
using AntennaIndex = Index<struct AntennaTag>;
using DistrictIndex = Index<struct DistrictTag>;

enum class UserClass : std::uint8_t { Refugee, Local, Unknown };

std::string_view to_string(UserClass c) noexcept;

/// Class encoded by the first character of an id: '1' refugee, '2' local,
/// '3' unknown. Anything else throws Error(BadPrefix).
UserClass classify_prefix(std::string_view id);

struct UserId {
  std::string raw;
  UserClass cls = UserClass::Unknown;

  static UserId parse(std::string_view raw);
  friend auto operator<=>(const UserId&, const UserId&) = default;
};

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

/// Bidirectional string <-> dense index table; indices follow first insertion.
class Interner {
 public:
  std::uint32_t intern(std::string_view s);
  std::optional<std::uint32_t> find(std::string_view s) const;
  const std::string& name(std::uint32_t i) const { return names_.at(i); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> index_;
  std::vector<std::string> names_;
};

/// Users seen in a dataset; classes are derived from the id prefix.
class UserTable {
 public:
  UserIndex intern(std::string_view raw_id);
  std::optional<UserIndex> find(std::string_view raw_id) const;
  UserId id(UserIndex u) const;
  const std::string& raw(UserIndex u) const { return ids_.name(u.value); }
  UserClass cls(UserIndex u) const { return classes_.at(u.value); }
  std::size_t size() const noexcept { return ids_.size(); }

 private:
  Interner ids_;
  std::vector<UserClass> classes_;
};

// ---------------------------------------------------------------------------
// Time

/// Local wall-clock seconds since 1970-01-01T00:00:00 (no zone, no DST).
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerDay = 86'400;
inline constexpr std::int64_t kSecondsPerHour = 3'600;

/// Parses "YYYY-MM-DDTHH:MM:SS" (a space separator is accepted as well).
std::optional<Timestamp> parse_timestamp(std::string_view s) noexcept;
/// Parses "YYYY-MM-DD" to the timestamp of its midnight.
std::optional<Timestamp> parse_date(std::string_view s) noexcept;
std::string format_timestamp(Timestamp t);
std::string format_date(Timestamp t);

inline int hour_of_day(Timestamp t) noexcept {
  const std::int64_t s = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
  return static_cast<int>(s / kSecondsPerHour);
}

inline Timestamp day_start(Timestamp t) noexcept {
  const std::int64_t s = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
  return t - s;
}

class StudyYear {
 public:
  explicit StudyYear(int year = 2017);

  int year() const noexcept { return year_; }
  Timestamp start() const noexcept { return start_; }
  Timestamp end() const noexcept { return start_ + n_days_ * kSecondsPerDay; }
  int n_days() const noexcept { return n_days_; }
  bool contains(Timestamp t) const noexcept { return t >= start() && t < end(); }
  /// Zero-based day of year; requires contains(t).
  int day_index(Timestamp t) const noexcept {
    return static_cast<int>((t - start_) / kSecondsPerDay);
  }
  Timestamp day(int index) const noexcept { return start_ + index * kSecondsPerDay; }
  /// Calendar month 1..12 of `t`.
  int month_of(Timestamp t) const noexcept;
  /// First instant of calendar month `m` (1..12); m = 13 gives end().
  Timestamp month_start(int m) const noexcept;

 private:
  int year_;
  Timestamp start_;
  int n_days_;
};

// ---------------------------------------------------------------------------
// Registry

struct Antenna {
  std::string id;
  geo::GeoPoint location;
  DistrictIndex district;
};

struct District {
  std::string id;
  std::string name;
  std::optional<double> rent_cost_per_m2;
};

/// Antennas and districts an input stream is resolved against.
class Registry {
 public:
  AntennaIndex add_antenna(std::string_view id, geo::GeoPoint location, std::string_view district);
  DistrictIndex add_district(std::string_view id);
  void set_district_attributes(std::string_view id, std::string_view name, double rent_cost);

  std::optional<AntennaIndex> find_antenna(std::string_view id) const;
  std::optional<DistrictIndex> find_district(std::string_view id) const;

  const Antenna& antenna(AntennaIndex a) const { return antennas_.at(a.value); }
  const District& district(DistrictIndex d) const { return districts_.at(d.value); }
  std::size_t antenna_count() const noexcept { return antennas_.size(); }
  std::size_t district_count() const noexcept { return districts_.size(); }
  std::span<const Antenna> antennas() const noexcept { return antennas_; }
  std::span<const District> districts() const noexcept { return districts_; }

  /// Unweighted mean of the district's antenna coordinates; nullopt when the
  /// district has no antennas.
  std::optional<geo::GeoPoint> district_centroid(DistrictIndex d) const;

 private:
  Interner antenna_ids_;
  Interner district_ids_;
  std::vector<Antenna> antennas_;
  std::vector<District> districts_;
};

// ---------------------------------------------------------------------------
// Records

enum class SiteKind : std::uint8_t { Antenna, District };

/// One call event from FGMD (site = antenna) or CGMD (site = district; no
/// callee information, callee_class is Unknown).
struct CallRecord {
  Timestamp ts = 0;
  UserIndex caller;
  std::uint32_t site = 0;
  UserClass caller_class = UserClass::Unknown;
  UserClass callee_class = UserClass::Unknown;
  SiteKind site_kind = SiteKind::Antenna;

  AntennaIndex antenna() const noexcept { return AntennaIndex{site}; }
  DistrictIndex district() const noexcept { return DistrictIndex{site}; }
};

struct TrafficRecord {
  Timestamp ts = 0;  // hour resolution
  AntennaIndex out_antenna;
  AntennaIndex in_antenna;
  std::int64_t total_calls = 0;
  std::int64_t refugee_calls = 0;
  std::int64_t total_duration_s = 0;
  std::int64_t refugee_duration_s = 0;

  bool valid() const noexcept {
    return total_calls >= 0 && refugee_calls >= 0 && total_duration_s >= 0 &&
           refugee_duration_s >= 0 && refugee_calls <= total_calls &&
           refugee_duration_s <= total_duration_s;
  }
};

// ---------------------------------------------------------------------------
// Parsing

enum class Strictness { Strict, Lenient };

/// Per-row parsers. Each throws Error with the row-level code on bad input.
class FgmdParser {
 public:
  FgmdParser(const Registry& registry, UserTable& users) : registry_(registry), users_(users) {}
  CallRecord parse(std::string_view line) const;

 private:
  const Registry& registry_;
  UserTable& users_;
};

class CgmdParser {
 public:
  CgmdParser(const Registry& registry, UserTable& users) : registry_(registry), users_(users) {}
  CallRecord parse(std::string_view line) const;

 private:
  const Registry& registry_;
  UserTable& users_;
};

TrafficRecord parse_atd(std::string_view line, const Registry& registry);

/// Counts of rows skipped by lenient ingestion, keyed by error code name.
struct IngestReport {
  std::string path;
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> skipped;

  std::size_t skipped_total() const;
};

/// Whole-file readers. The first line is a header and is validated against
/// the expected column names. In Lenient mode rows with an unknown
/// antenna/district are skipped and counted; every other row error is fatal.
/// FGMD ingestion splits the file into `workers` chunks parsed in parallel;
/// the result is identical for any worker count.
std::vector<CallRecord> read_fgmd(const std::string& path, const Registry& registry,
                                  UserTable& users, Strictness strictness, IngestReport* report,
                                  unsigned workers = 1);
std::vector<CallRecord> read_cgmd(const std::string& path, const Registry& registry,
                                  UserTable& users, Strictness strictness, IngestReport* report);
std::vector<TrafficRecord> read_atd(const std::string& path, const Registry& registry,
                                    Strictness strictness, IngestReport* report);

/// Parses an in-memory FGMD body (header included); see read_fgmd.
std::vector<CallRecord> parse_fgmd_text(std::string_view body, const Registry& registry,
                                        UserTable& users, Strictness strictness,
                                        IngestReport* report, unsigned workers = 1);

void read_antenna_registry(const std::string& path, Registry& registry);
void read_district_attributes(const std::string& path, Registry& registry);

inline constexpr std::string_view kFgmdHeader = "caller_id,timestamp,callee_prefix,antenna_id";
inline constexpr std::string_view kCgmdHeader = "caller_id,timestamp,district_id";
inline constexpr std::string_view kAtdHeader =
    "timestamp,out_antenna,in_antenna,total_calls,refugee_calls,total_duration_s,"
    "refugee_duration_s";
inline constexpr std::string_view kAntennaHeader = "antenna_id,lat_deg,lon_deg,district_id";
inline constexpr std::string_view kDistrictHeader = "district_id,name,rent_cost_per_m2";

// ---------------------------------------------------------------------------
// Selection

struct DropResult {
  std::vector<CallRecord> kept;
  double dropped_fraction = 0.0;
};

/// Removes records whose callee class is Unknown.
DropResult drop_unknown_callee(std::span<const CallRecord> records);

enum class PeriodScheme { TwoWeeks, CalendarMonth };

struct Period {
  int index = 1;  // 1-based
  Timestamp start = 0;
  int n_days = 14;
  PeriodScheme scheme = PeriodScheme::TwoWeeks;

  Timestamp end() const noexcept { return start + n_days * kSecondsPerDay; }
  bool contains(Timestamp t) const noexcept { return t >= start && t < end(); }
  friend auto operator<=>(const Period& a, const Period& b) {
    if (a.scheme != b.scheme) return a.scheme <=> b.scheme;
    return a.index <=> b.index;
  }
  friend bool operator==(const Period& a, const Period& b) {
    return a.scheme == b.scheme && a.index == b.index;
  }
};

inline constexpr int kTwoWeekPeriodDays = 14;

/// All periods of the scheme over the study year. Two-week periods tile the
/// year from January 1st; trailing days that do not fill a period are not
/// covered by any period.
std::vector<Period> periods_of(const StudyYear& year, PeriodScheme scheme);

/// Period containing `t`, or nullopt for an uncovered trailing day.
/// Throws Error(TimestampOutOfStudyYear) outside the year.
std::optional<Period> period_of(Timestamp t, const StudyYear& year, PeriodScheme scheme);

struct PeriodPartition {
  std::map<Period, std::vector<CallRecord>> buckets;
  std::size_t discarded = 0;  // records on uncovered trailing days
};

PeriodPartition partition_periods(std::span<const CallRecord> records, const StudyYear& year,
                                  PeriodScheme scheme);

using UserSet = std::set<UserIndex>;

/// Callers with at least min_avg * period-length-in-days calls inside the
/// period (inclusive boundary).
UserSet filter_active_users(std::span<const CallRecord> records, const Period& period,
                            double min_avg = 2.0);

}  // namespace cdrstig::cdr

template <class Tag>
struct std::hash<cdrstig::cdr::Index<Tag>> {
  std::size_t operator()(cdrstig::cdr::Index<Tag> i) const noexcept {
    return std::hash<std::uint32_t>{}(i.value);
  }
};
