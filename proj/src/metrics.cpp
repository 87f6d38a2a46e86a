#include "cdrstig/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <random>
#include <unordered_map>

#include "cdrstig/error.hpp"

namespace cdrstig::metrics {

double interaction_level(std::span<const CallRecord> user_records) {
  std::int64_t to_locals = 0, to_refugees = 0;
  for (const auto& r : user_records) {
    if (r.callee_class == cdr::UserClass::Local) ++to_locals;
    else if (r.callee_class == cdr::UserClass::Refugee) ++to_refugees;
  }
  if (to_locals + to_refugees == 0)
    throw Error(ErrorCode::NoCalls, "no calls to locals or refugees");
  return static_cast<double>(to_locals) / static_cast<double>(to_locals + to_refugees);
}

int il_bin(double il) {
  if (!(il >= 0.0 && il <= 1.0))
    throw Error(ErrorCode::OutOfRange, "interaction level outside [0, 1]");
  // Compare against the bin edges directly so 0.2, 0.4, ... land left-closed
  // regardless of how il * 5 rounds.
  static constexpr double edges[] = {0.2, 0.4, 0.6, 0.8};
  int bin = 1;
  for (double e : edges)
    if (il >= e) ++bin;
  return bin;
}

CallingPattern calling_pattern(std::span<const CallRecord> records) {
  if (records.empty()) throw Error(ErrorCode::NoCalls, "calling pattern of no calls");
  std::array<std::int64_t, kHours> counts{};
  for (const auto& r : records) ++counts[static_cast<std::size_t>(cdr::hour_of_day(r.ts))];
  const double mean = static_cast<double>(records.size()) / kHours;
  CallingPattern cp;
  for (std::size_t h = 0; h < kHours; ++h) {
    cp.values[h] = static_cast<double>(counts[h]) / mean;
    cp.observed[h] = counts[h] > 0;
  }
  return cp;
}

CallingPattern local_average_pattern(std::span<const CallingPattern> patterns) {
  if (patterns.empty()) throw Error(ErrorCode::NoLocals, "no local calling patterns");
  CallingPattern avg;
  for (const auto& p : patterns)
    for (std::size_t h = 0; h < kHours; ++h) {
      avg.values[h] += p.values[h];
      avg.observed[h] = avg.observed[h] || p.observed[h];
    }
  const double n = static_cast<double>(patterns.size());
  for (auto& v : avg.values) v /= n;
  return avg;
}

double calling_regularity(const CallingPattern& cp, const CallingPattern& lcp, CrMode mode) {
  double dot = 0.0, ncp = 0.0, nlcp = 0.0, nlcp_full = 0.0;
  for (std::size_t h = 0; h < kHours; ++h) {
    nlcp_full += lcp.values[h] * lcp.values[h];
    if (mode == CrMode::PairwiseComplete && !cp.observed[h]) continue;
    dot += cp.values[h] * lcp.values[h];
    ncp += cp.values[h] * cp.values[h];
    nlcp += lcp.values[h] * lcp.values[h];
  }
  if (!(ncp > 0.0)) throw Error(ErrorCode::ZeroVector, "calling pattern is all zero");
  if (!(nlcp_full > 0.0)) throw Error(ErrorCode::ZeroVector, "local pattern is all zero");
  // The local pattern may vanish on the user's observed hours: no shared mass.
  if (!(nlcp > 0.0)) return 0.0;
  const double cr = dot / (std::sqrt(ncp) * std::sqrt(nlcp));
  return std::clamp(cr, 0.0, 1.0);
}

// ---------------------------------------------------------------------------

DistrictIndex district_of(const CallRecord& r, const cdr::Registry& registry) {
  if (r.site_kind == cdr::SiteKind::District) return r.district();
  return registry.antenna(r.antenna()).district;
}

std::optional<Residence> infer_residence(std::span<const CallRecord> user_records, UserIndex user,
                                         int month, const cdr::Registry& registry) {
  std::unordered_map<DistrictIndex, std::int64_t> counts;
  for (const auto& r : user_records)
    if (is_night_hour(cdr::hour_of_day(r.ts))) ++counts[district_of(r, registry)];
  if (counts.empty()) return std::nullopt;
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > best->second ||
        (it->second == best->second &&
         registry.district(it->first).id < registry.district(best->first).id))
      best = it;
  }
  return Residence{user, month, best->first};
}

std::vector<Residence> infer_residences(std::span<const CallRecord> records,
                                        const cdr::StudyYear& year,
                                        const cdr::Registry& registry, cdr::UserClass cls) {
  // (user, month) -> night records, built in one pass.
  std::map<std::pair<UserIndex, int>, std::vector<CallRecord>> night;
  for (const auto& r : records) {
    if (r.caller_class != cls || !year.contains(r.ts)) continue;
    if (!is_night_hour(cdr::hour_of_day(r.ts))) continue;
    night[{r.caller, year.month_of(r.ts)}].push_back(r);
  }
  std::vector<Residence> out;
  out.reserve(night.size());
  for (const auto& [key, recs] : night)
    if (auto res = infer_residence(recs, key.first, key.second, registry)) out.push_back(*res);
  return out;
}

cdr::UserSet long_term_residents(std::span<const Residence> residences, int min_months,
                                 const std::set<DistrictIndex>* study_area) {
  std::map<UserIndex, std::set<int>> months;
  for (const auto& r : residences) {
    if (study_area && !study_area->contains(r.district)) continue;
    months[r.user].insert(r.month);
  }
  cdr::UserSet out;
  for (const auto& [u, ms] : months)
    if (static_cast<int>(ms.size()) >= min_months) out.insert(u);
  return out;
}

// ---------------------------------------------------------------------------

std::map<std::pair<DistrictIndex, int>, NightCounts> night_traffic(
    std::span<const cdr::TrafficRecord> traffic, const cdr::Registry& registry,
    const cdr::StudyYear& year) {
  std::map<std::pair<DistrictIndex, int>, NightCounts> out;
  for (const auto& r : traffic) {
    if (!year.contains(r.ts) || !is_night_hour(cdr::hour_of_day(r.ts))) continue;
    auto& c = out[{registry.antenna(r.out_antenna).district, year.month_of(r.ts)}];
    c.refugee += r.refugee_calls;
    c.total += r.total_calls;
  }
  return out;
}

double residential_inclusion(const NightCounts& counts) {
  if (counts.total <= 0) throw Error(ErrorCode::NoNightTraffic, "no night traffic");
  return static_cast<double>(counts.refugee) / static_cast<double>(counts.total);
}

double residential_inclusion(std::span<const cdr::TrafficRecord> traffic, DistrictIndex district,
                             int month, const cdr::Registry& registry,
                             const cdr::StudyYear& year) {
  NightCounts c;
  for (const auto& r : traffic) {
    if (!year.contains(r.ts) || year.month_of(r.ts) != month) continue;
    if (!is_night_hour(cdr::hour_of_day(r.ts))) continue;
    if (registry.antenna(r.out_antenna).district != district) continue;
    c.refugee += r.refugee_calls;
    c.total += r.total_calls;
  }
  if (c.total <= 0)
    throw Error(ErrorCode::NoNightTraffic, "district " + registry.district(district).id +
                                               " has no night traffic in month " +
                                               std::to_string(month));
  return residential_inclusion(c);
}

double district_attractiveness(std::span<const Residence> residences, DistrictIndex district,
                               int month, int last_month) {
  if (month + 1 > last_month)
    throw Error(ErrorCode::LastMonth, "month " + std::to_string(month) + " has no successor");
  cdr::UserSet now, next;
  for (const auto& r : residences) {
    if (r.district != district) continue;
    if (r.month == month) now.insert(r.user);
    else if (r.month == month + 1) next.insert(r.user);
  }
  if (now.empty())
    throw Error(ErrorCode::NoResidents, "no residents in month " + std::to_string(month));
  std::size_t stay = 0;
  for (const auto& u : now) stay += next.count(u);
  return static_cast<double>(stay) / static_cast<double>(now.size());
}

// ---------------------------------------------------------------------------

geo::GridSpec mobility_raster(const cdr::Registry& registry, const stig::EngineConfig& engine) {
  std::vector<geo::GeoPoint> pts;
  pts.reserve(registry.antenna_count());
  for (const auto& a : registry.antennas()) pts.push_back(a.location);
  const auto pad = static_cast<std::int32_t>(
      std::ceil(engine.mark.base_radius_m / engine.cell_size_m)) + 1;
  return geo::bounding_grid(pts, engine.cell_size_m, pad);
}

stig::Trail group_day_trail(const cdr::UserSet& group, std::span<const CallRecord> day_records,
                            cdr::Timestamp day_start, const TrailContext& ctx) {
  const auto& engine = ctx.engine;
  const stig::StepWindow window{
      stig::step_of(day_start, engine.step_seconds),
      stig::step_of(day_start + cdr::kSecondsPerDay - 1, engine.step_seconds)};
  std::vector<stig::SampleEvent> samples;
  for (const auto& r : day_records) {
    if (r.ts < day_start || r.ts >= day_start + cdr::kSecondsPerDay) continue;
    if (!group.contains(r.caller)) continue;
    samples.push_back(stig::SampleEvent{ctx.registry->antenna(r.antenna()).location,
                                        stig::step_of(r.ts, engine.step_seconds)});
  }
  return stig::build_trail(samples, window, engine.policy, engine.mark, ctx.raster);
}

double mobility_similarity(const cdr::UserSet& refugee_group, const cdr::UserSet& local_group,
                           std::span<const CallRecord> day_records, cdr::Timestamp day_start,
                           const TrailContext& ctx) {
  if (refugee_group.size() != local_group.size() || refugee_group.empty())
    throw Error(ErrorCode::UnequalGroups, "groups must be equally sized and non-empty");
  const auto tr = group_day_trail(refugee_group, day_records, day_start, ctx);
  const auto tl = group_day_trail(local_group, day_records, day_start, ctx);
  return stig::trail_similarity(tr, tl);
}

cdr::UserSet subsample(const cdr::UserSet& users, std::size_t k, std::uint64_t seed) {
  if (k >= users.size()) return users;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<UserIndex> picked;
  picked.reserve(k);
  std::sample(users.begin(), users.end(), std::back_inserter(picked), k, rng);
  return cdr::UserSet(picked.begin(), picked.end());
}

std::map<int, cdr::UserSet> subsample_equal_groups(const std::map<int, cdr::UserSet>& groups,
                                                   std::uint64_t seed) {
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& [bin, members] : groups) {
    if (members.empty())
      throw Error(ErrorCode::EmptyGroup, "group " + std::to_string(bin) + " is empty");
    smallest = std::min(smallest, members.size());
  }
  std::map<int, cdr::UserSet> out;
  for (const auto& [bin, members] : groups) {
    const std::uint64_t group_seed =
        seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(bin + 1));
    out.emplace(bin, subsample(members, smallest, group_seed));
  }
  return out;
}

}  // namespace cdrstig::metrics
