#include "cdrstig/cdr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <exception>
#include <thread>
#include <unordered_map>

#include "cdrstig/error.hpp"
#include "cdrstig/text.hpp"

namespace cdrstig::cdr {

namespace {

using namespace std::chrono;

Timestamp to_timestamp(sys_days d) noexcept {
  return static_cast<Timestamp>(d.time_since_epoch().count()) * kSecondsPerDay;
}

bool digits(std::string_view s, int& out) noexcept {
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return !s.empty();
}

std::optional<sys_days> parse_ymd(std::string_view s) noexcept {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
  int y = 0, m = 0, d = 0;
  if (!digits(s.substr(0, 4), y) || !digits(s.substr(5, 2), m) || !digits(s.substr(8, 2), d))
    return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd};
}

std::string row_context(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

void expect_header(std::string_view header, std::string_view expected, const std::string& path) {
  if (text::trim(header) != expected)
    throw Error(ErrorCode::MalformedRow,
                path + ": unexpected header, want '" + std::string(expected) + "'");
}

bool skippable(ErrorCode code) {
  return code == ErrorCode::UnknownAntenna || code == ErrorCode::UnknownDistrict;
}

/// Runs `parse` over every data line of `body` (header already consumed).
/// Row errors are rethrown with the file position, except skippable ones in
/// lenient mode.
template <class Out, class ParseFn>
void for_each_row(std::string_view body, std::size_t first_line_no, const std::string& path,
                  Strictness strictness, IngestReport& report, std::vector<Out>& out,
                  ParseFn&& parse) {
  std::size_t line_no = first_line_no;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    const std::string_view line = text::chomp(body.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    ++report.rows;
    try {
      out.push_back(parse(line));
      ++report.accepted;
    } catch (const Error& e) {
      if (strictness == Strictness::Lenient && skippable(e.code())) {
        ++report.skipped[std::string(to_string(e.code()))];
        continue;
      }
      throw Error(e.code(), row_context(path, line_no) + ": " + e.what());
    }
  }
}

std::pair<std::string_view, std::string_view> split_header(std::string_view body) {
  const auto nl = body.find('\n');
  if (nl == std::string_view::npos) return {text::chomp(body), {}};
  return {text::chomp(body.substr(0, nl)), body.substr(nl + 1)};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(UserClass c) noexcept {
  switch (c) {
    case UserClass::Refugee: return "refugee";
    case UserClass::Local: return "local";
    case UserClass::Unknown: return "unknown";
  }
  return "unknown";
}

UserClass classify_prefix(std::string_view id) {
  if (!id.empty()) {
    switch (id.front()) {
      case '1': return UserClass::Refugee;
      case '2': return UserClass::Local;
      case '3': return UserClass::Unknown;
      default: break;
    }
  }
  throw Error(ErrorCode::BadPrefix, "id '" + std::string(id) + "' has no class prefix 1/2/3");
}

UserId UserId::parse(std::string_view raw) { return UserId{std::string(raw), classify_prefix(raw)}; }

std::uint32_t Interner::intern(std::string_view s) {
  if (auto it = index_.find(s); it != index_.end()) return it->second;
  const auto i = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(s);
  index_.emplace(names_.back(), i);
  return i;
}

std::optional<std::uint32_t> Interner::find(std::string_view s) const {
  if (auto it = index_.find(s); it != index_.end()) return it->second;
  return std::nullopt;
}

UserIndex UserTable::intern(std::string_view raw_id) {
  if (auto found = ids_.find(raw_id)) return UserIndex{*found};
  const UserClass cls = classify_prefix(raw_id);
  const auto i = ids_.intern(raw_id);
  classes_.push_back(cls);
  return UserIndex{i};
}

std::optional<UserIndex> UserTable::find(std::string_view raw_id) const {
  if (auto found = ids_.find(raw_id)) return UserIndex{*found};
  return std::nullopt;
}

UserId UserTable::id(UserIndex u) const { return UserId{raw(u), cls(u)}; }

// ---------------------------------------------------------------------------

std::optional<Timestamp> parse_date(std::string_view s) noexcept {
  const auto d = parse_ymd(text::trim(s));
  if (!d) return std::nullopt;
  return to_timestamp(*d);
}

std::optional<Timestamp> parse_timestamp(std::string_view s) noexcept {
  s = text::trim(s);
  if (s.size() != 19 || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' || s[16] != ':')
    return std::nullopt;
  const auto d = parse_ymd(s.substr(0, 10));
  int hh = 0, mm = 0, ss = 0;
  if (!d || !digits(s.substr(11, 2), hh) || !digits(s.substr(14, 2), mm) ||
      !digits(s.substr(17, 2), ss))
    return std::nullopt;
  if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
  return to_timestamp(*d) + hh * kSecondsPerHour + mm * 60 + ss;
}

std::string format_date(Timestamp t) {
  const sys_days d{days{(t - (((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay)) /
                        kSecondsPerDay}};
  const year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(Timestamp t) {
  const std::int64_t s = ((t % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay;
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", static_cast<int>(s / 3600),
                static_cast<int>((s / 60) % 60), static_cast<int>(s % 60));
  return format_date(t) + buf;
}

StudyYear::StudyYear(int y) : year_(y) {
  const sys_days first{std::chrono::year{y} / January / 1};
  const sys_days next{std::chrono::year{y + 1} / January / 1};
  start_ = to_timestamp(first);
  n_days_ = static_cast<int>((next - first).count());
}

int StudyYear::month_of(Timestamp t) const noexcept {
  const sys_days d{days{(day_start(t)) / kSecondsPerDay}};
  return static_cast<int>(static_cast<unsigned>(year_month_day{d}.month()));
}

Timestamp StudyYear::month_start(int m) const noexcept {
  if (m > 12) return end();
  return to_timestamp(sys_days{std::chrono::year{year_} / std::chrono::month{static_cast<unsigned>(m)} / 1});
}

// ---------------------------------------------------------------------------

DistrictIndex Registry::add_district(std::string_view id) {
  if (auto d = district_ids_.find(id)) return DistrictIndex{*d};
  const auto i = district_ids_.intern(id);
  districts_.push_back(District{std::string(id), std::string(id), std::nullopt});
  return DistrictIndex{i};
}

AntennaIndex Registry::add_antenna(std::string_view id, geo::GeoPoint location,
                                   std::string_view district) {
  if (antenna_ids_.find(id))
    throw Error(ErrorCode::MalformedRow, "duplicate antenna id '" + std::string(id) + "'");
  if (!location.valid())
    throw Error(ErrorCode::MalformedRow, "antenna '" + std::string(id) + "' has invalid location");
  const DistrictIndex d = add_district(district);
  const auto i = antenna_ids_.intern(id);
  antennas_.push_back(Antenna{std::string(id), location, d});
  return AntennaIndex{i};
}

void Registry::set_district_attributes(std::string_view id, std::string_view name,
                                       double rent_cost) {
  const DistrictIndex d = add_district(id);
  districts_[d.value].name = std::string(name);
  districts_[d.value].rent_cost_per_m2 = rent_cost;
}

std::optional<AntennaIndex> Registry::find_antenna(std::string_view id) const {
  if (auto a = antenna_ids_.find(id)) return AntennaIndex{*a};
  return std::nullopt;
}

std::optional<DistrictIndex> Registry::find_district(std::string_view id) const {
  if (auto d = district_ids_.find(id)) return DistrictIndex{*d};
  return std::nullopt;
}

std::optional<geo::GeoPoint> Registry::district_centroid(DistrictIndex d) const {
  double lat = 0.0, lon = 0.0;
  std::size_t n = 0;
  for (const auto& a : antennas_) {
    if (a.district != d) continue;
    lat += a.location.lat;
    lon += a.location.lon;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return geo::GeoPoint{lat / static_cast<double>(n), lon / static_cast<double>(n)};
}

// ---------------------------------------------------------------------------

CallRecord FgmdParser::parse(std::string_view line) const {
  std::array<std::string_view, 4> f;
  if (text::split(line, ',', f) != f.size())
    throw Error(ErrorCode::MalformedRow, "FGMD row needs 4 fields");
  CallRecord r;
  const auto ts = parse_timestamp(f[1]);
  if (!ts) throw Error(ErrorCode::BadTimestamp, "bad timestamp '" + std::string(f[1]) + "'");
  r.ts = *ts;
  const auto callee = text::trim(f[2]);
  if (callee.size() != 1) throw Error(ErrorCode::BadPrefix, "callee prefix must be one digit");
  r.callee_class = classify_prefix(callee);
  const auto antenna = registry_.find_antenna(text::trim(f[3]));
  if (!antenna)
    throw Error(ErrorCode::UnknownAntenna, "antenna '" + std::string(f[3]) + "' not in registry");
  r.site = antenna->value;
  r.site_kind = SiteKind::Antenna;
  r.caller = users_.intern(text::trim(f[0]));
  r.caller_class = users_.cls(r.caller);
  return r;
}

CallRecord CgmdParser::parse(std::string_view line) const {
  std::array<std::string_view, 3> f;
  if (text::split(line, ',', f) != f.size())
    throw Error(ErrorCode::MalformedRow, "CGMD row needs 3 fields");
  CallRecord r;
  const auto ts = parse_timestamp(f[1]);
  if (!ts) throw Error(ErrorCode::BadTimestamp, "bad timestamp '" + std::string(f[1]) + "'");
  r.ts = *ts;
  const auto district = registry_.find_district(text::trim(f[2]));
  if (!district)
    throw Error(ErrorCode::UnknownDistrict,
                "district '" + std::string(f[2]) + "' not in registry");
  r.site = district->value;
  r.site_kind = SiteKind::District;
  r.callee_class = UserClass::Unknown;
  r.caller = users_.intern(text::trim(f[0]));
  r.caller_class = users_.cls(r.caller);
  return r;
}

TrafficRecord parse_atd(std::string_view line, const Registry& registry) {
  std::array<std::string_view, 7> f;
  if (text::split(line, ',', f) != f.size())
    throw Error(ErrorCode::MalformedRow, "ATD row needs 7 fields");
  TrafficRecord r;
  const auto ts = parse_timestamp(f[0]);
  if (!ts) throw Error(ErrorCode::BadTimestamp, "bad timestamp '" + std::string(f[0]) + "'");
  r.ts = *ts;
  const auto out = registry.find_antenna(text::trim(f[1]));
  if (!out)
    throw Error(ErrorCode::UnknownAntenna, "antenna '" + std::string(f[1]) + "' not in registry");
  const auto in = registry.find_antenna(text::trim(f[2]));
  if (!in)
    throw Error(ErrorCode::UnknownAntenna, "antenna '" + std::string(f[2]) + "' not in registry");
  r.out_antenna = *out;
  r.in_antenna = *in;
  if (!text::parse_int(f[3], r.total_calls) || !text::parse_int(f[4], r.refugee_calls) ||
      !text::parse_int(f[5], r.total_duration_s) || !text::parse_int(f[6], r.refugee_duration_s))
    throw Error(ErrorCode::MalformedRow, "ATD counts must be integers");
  if (!r.valid())
    throw Error(ErrorCode::MalformedRow, "ATD counts must be non-negative with refugee <= total");
  return r;
}

std::size_t IngestReport::skipped_total() const {
  std::size_t n = 0;
  for (const auto& [k, v] : skipped) n += v;
  return n;
}

std::vector<CallRecord> parse_fgmd_text(std::string_view body, const Registry& registry,
                                        UserTable& users, Strictness strictness,
                                        IngestReport* report, unsigned workers) {
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;
  const auto [header, rows] = split_header(body);
  expect_header(header, kFgmdHeader, rep.path);

  workers = std::max(1u, workers);
  if (workers == 1 || rows.size() < (1u << 20)) {
    std::vector<CallRecord> out;
    out.reserve(rows.size() / 36);
    FgmdParser parser(registry, users);
    for_each_row(rows, 1, rep.path, strictness, rep, out,
                 [&](std::string_view line) { return parser.parse(line); });
    return out;
  }

  // Chunk boundaries at newlines; every chunk interns users locally and the
  // tables are merged in chunk order, so indices match a sequential parse.
  std::vector<std::string_view> chunks;
  std::vector<std::size_t> first_line;
  std::size_t begin = 0, lines_before = 1;
  for (unsigned w = 0; w < workers && begin < rows.size(); ++w) {
    std::size_t end = w + 1 == workers ? rows.size()
                                       : std::min(rows.size(), begin + rows.size() / workers);
    if (end < rows.size()) {
      const auto nl = rows.find('\n', end);
      end = nl == std::string_view::npos ? rows.size() : nl + 1;
    }
    const auto chunk = rows.substr(begin, end - begin);
    chunks.push_back(chunk);
    first_line.push_back(lines_before);
    lines_before += static_cast<std::size_t>(std::count(chunk.begin(), chunk.end(), '\n'));
    begin = end;
  }

  const std::size_t n = chunks.size();
  std::vector<UserTable> tables(n);
  std::vector<std::vector<CallRecord>> parts(n);
  std::vector<IngestReport> reports(n);
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < n; ++i) {
      threads.emplace_back([&, i] {
        try {
          reports[i].path = rep.path;
          parts[i].reserve(chunks[i].size() / 36);
          FgmdParser parser(registry, tables[i]);
          for_each_row(chunks[i], first_line[i], rep.path, strictness, reports[i], parts[i],
                       [&](std::string_view line) { return parser.parse(line); });
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  std::vector<CallRecord> out;
  out.reserve(total);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<UserIndex> remap(tables[i].size());
    for (std::uint32_t u = 0; u < tables[i].size(); ++u)
      remap[u] = users.intern(tables[i].raw(UserIndex{u}));
    for (auto r : parts[i]) {
      r.caller = remap[r.caller.value];
      out.push_back(r);
    }
    rep.rows += reports[i].rows;
    rep.accepted += reports[i].accepted;
    for (const auto& [k, v] : reports[i].skipped) rep.skipped[k] += v;
  }
  return out;
}

std::vector<CallRecord> read_fgmd(const std::string& path, const Registry& registry,
                                  UserTable& users, Strictness strictness, IngestReport* report,
                                  unsigned workers) {
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;
  rep.path = path;
  const std::string body = text::read_file(path);
  return parse_fgmd_text(body, registry, users, strictness, &rep, workers);
}

std::vector<CallRecord> read_cgmd(const std::string& path, const Registry& registry,
                                  UserTable& users, Strictness strictness, IngestReport* report) {
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;
  rep.path = path;
  const std::string body = text::read_file(path);
  const auto [header, rows] = split_header(body);
  expect_header(header, kCgmdHeader, path);
  std::vector<CallRecord> out;
  CgmdParser parser(registry, users);
  for_each_row(rows, 1, path, strictness, rep, out,
               [&](std::string_view line) { return parser.parse(line); });
  return out;
}

std::vector<TrafficRecord> read_atd(const std::string& path, const Registry& registry,
                                    Strictness strictness, IngestReport* report) {
  IngestReport local_report;
  IngestReport& rep = report ? *report : local_report;
  rep.path = path;
  const std::string body = text::read_file(path);
  const auto [header, rows] = split_header(body);
  expect_header(header, kAtdHeader, path);
  std::vector<TrafficRecord> out;
  for_each_row(rows, 1, path, strictness, rep, out,
               [&](std::string_view line) { return parse_atd(line, registry); });
  return out;
}

void read_antenna_registry(const std::string& path, Registry& registry) {
  const std::string body = text::read_file(path);
  const auto [header, rows] = split_header(body);
  expect_header(header, kAntennaHeader, path);
  IngestReport rep;
  std::vector<int> sink;
  for_each_row(rows, 1, path, Strictness::Strict, rep, sink, [&](std::string_view line) {
    std::array<std::string_view, 4> f;
    if (text::split(line, ',', f) != f.size())
      throw Error(ErrorCode::MalformedRow, "antenna row needs 4 fields");
    geo::GeoPoint p;
    if (!text::parse_double(f[1], p.lat) || !text::parse_double(f[2], p.lon))
      throw Error(ErrorCode::MalformedRow, "antenna coordinates must be numbers");
    registry.add_antenna(text::trim(f[0]), p, text::trim(f[3]));
    return 0;
  });
}

void read_district_attributes(const std::string& path, Registry& registry) {
  const std::string body = text::read_file(path);
  const auto [header, rows] = split_header(body);
  expect_header(header, kDistrictHeader, path);
  IngestReport rep;
  std::vector<int> sink;
  for_each_row(rows, 1, path, Strictness::Strict, rep, sink, [&](std::string_view line) {
    std::array<std::string_view, 3> f;
    if (text::split(line, ',', f) != f.size())
      throw Error(ErrorCode::MalformedRow, "district row needs 3 fields");
    double rent = 0;
    if (!text::parse_double(f[2], rent) || rent < 0)
      throw Error(ErrorCode::MalformedRow, "rent cost must be a non-negative number");
    registry.set_district_attributes(text::trim(f[0]), text::trim(f[1]), rent);
    return 0;
  });
}

// ---------------------------------------------------------------------------

DropResult drop_unknown_callee(std::span<const CallRecord> records) {
  DropResult out;
  out.kept.reserve(records.size());
  for (const auto& r : records)
    if (r.callee_class != UserClass::Unknown) out.kept.push_back(r);
  if (!records.empty())
    out.dropped_fraction = static_cast<double>(records.size() - out.kept.size()) /
                           static_cast<double>(records.size());
  return out;
}

std::vector<Period> periods_of(const StudyYear& year, PeriodScheme scheme) {
  std::vector<Period> out;
  if (scheme == PeriodScheme::TwoWeeks) {
    const int n = year.n_days() / kTwoWeekPeriodDays;
    for (int i = 0; i < n; ++i)
      out.push_back(Period{i + 1, year.day(i * kTwoWeekPeriodDays), kTwoWeekPeriodDays, scheme});
  } else {
    for (int m = 1; m <= 12; ++m) {
      const Timestamp s = year.month_start(m);
      const int days = static_cast<int>((year.month_start(m + 1) - s) / kSecondsPerDay);
      out.push_back(Period{m, s, days, scheme});
    }
  }
  return out;
}

std::optional<Period> period_of(Timestamp t, const StudyYear& year, PeriodScheme scheme) {
  if (!year.contains(t))
    throw Error(ErrorCode::TimestampOutOfStudyYear,
                format_timestamp(t) + " outside study year " + std::to_string(year.year()));
  if (scheme == PeriodScheme::TwoWeeks) {
    const int idx = year.day_index(t) / kTwoWeekPeriodDays;
    if (idx >= year.n_days() / kTwoWeekPeriodDays) return std::nullopt;
    return Period{idx + 1, year.day(idx * kTwoWeekPeriodDays), kTwoWeekPeriodDays, scheme};
  }
  const int m = year.month_of(t);
  const Timestamp s = year.month_start(m);
  return Period{m, s, static_cast<int>((year.month_start(m + 1) - s) / kSecondsPerDay), scheme};
}

PeriodPartition partition_periods(std::span<const CallRecord> records, const StudyYear& year,
                                  PeriodScheme scheme) {
  PeriodPartition out;
  const auto all = periods_of(year, scheme);
  std::vector<std::vector<CallRecord>> buckets(all.size());
  for (const auto& r : records) {
    const auto p = period_of(r.ts, year, scheme);
    if (!p) {
      ++out.discarded;
      continue;
    }
    buckets[static_cast<std::size_t>(p->index - 1)].push_back(r);
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (buckets[i].empty()) continue;
    std::stable_sort(buckets[i].begin(), buckets[i].end(),
                     [](const CallRecord& a, const CallRecord& b) { return a.ts < b.ts; });
    out.buckets.emplace(all[i], std::move(buckets[i]));
  }
  return out;
}

UserSet filter_active_users(std::span<const CallRecord> records, const Period& period,
                            double min_avg) {
  std::unordered_map<UserIndex, std::int64_t> counts;
  for (const auto& r : records)
    if (period.contains(r.ts)) ++counts[r.caller];
  const double need = min_avg * period.n_days;
  UserSet out;
  for (const auto& [u, n] : counts)
    if (static_cast<double>(n) >= need) out.insert(u);
  return out;
}

}  // namespace cdrstig::cdr
