#include "cdrstig/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "cdrstig/error.hpp"
#include "cdrstig/text.hpp"

namespace cdrstig::synth {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ConfigInvalid, what);
}

bool unit(double v) { return v >= 0.0 && v <= 1.0; }

std::array<double, 24> normalized(std::array<double, 24> w) {
  double s = 0.0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
  return w;
}

// Streams: 0 city, 1 refugees, 2 locals.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream, index};
  return std::mt19937_64(seq);
}

struct Xy {
  double x = 0.0, y = 0.0;
};

double dist(Xy a, Xy b) { return std::hypot(a.x - b.x, a.y - b.y); }

geo::GeoPoint to_geo(Xy p, geo::GeoPoint center) {
  const double lat0 = center.lat * geo::kPi / 180.0;
  return geo::GeoPoint{center.lat + p.y / geo::kEarthRadiusM * 180.0 / geo::kPi,
                       center.lon + p.x / (geo::kEarthRadiusM * std::cos(lat0)) * 180.0 / geo::kPi};
}

std::string padded(char prefix, std::size_t value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width)
    digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

struct City {
  cdr::Registry registry;
  std::vector<std::vector<std::uint32_t>> residential, hotspots, enclaves;  // per district
  std::vector<std::uint32_t> all_hotspots;
  std::vector<double> rent_norm;  // per district, min-max scaled rent
};

City build_city(const CityConfig& cfg, std::uint64_t seed) {
  auto rng = stream_rng(seed, 0, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int n = cfg.n_districts();

  std::vector<Xy> centroids;
  for (int r = 0; r < cfg.grid_rows; ++r)
    for (int c = 0; c < cfg.grid_cols; ++c)
      centroids.push_back(Xy{(c - (cfg.grid_cols - 1) / 2.0) * cfg.spacing_m +
                                 (2 * u01(rng) - 1) * cfg.jitter_m,
                             (r - (cfg.grid_rows - 1) / 2.0) * cfg.spacing_m +
                                 (2 * u01(rng) - 1) * cfg.jitter_m});

  const auto in_disk = [&](Xy c, double radius) {
    const double rr = radius * std::sqrt(u01(rng));
    const double th = 2 * geo::kPi * u01(rng);
    return Xy{c.x + rr * std::cos(th), c.y + rr * std::sin(th)};
  };

  std::vector<std::vector<Xy>> res(n), hot(n), enc(n);
  std::vector<Xy> core;
  for (int d = 0; d < n; ++d) {
    for (int i = 0; i < cfg.residential_per_district; ++i)
      core.push_back(res[d].emplace_back(in_disk(centroids[d], cfg.core_radius_m)));
    for (int i = 0; i < cfg.hotspots_per_district; ++i)
      core.push_back(hot[d].emplace_back(in_disk(centroids[d], cfg.core_radius_m)));
  }
  for (int d = 0; d < n; ++d)
    for (int i = 0; i < cfg.enclaves_per_district; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 500 && !placed; ++attempt) {
        const double rr = cfg.enclave_radius_m * (1.0 + 0.08 * u01(rng));
        const double th = 2 * geo::kPi * u01(rng);
        const Xy p{centroids[d].x + rr * std::cos(th), centroids[d].y + rr * std::sin(th)};
        const bool clear = std::all_of(core.begin(), core.end(), [&](Xy q) {
          return dist(p, q) >= cfg.enclave_clearance_m;
        });
        if (clear) {
          enc[d].push_back(p);
          placed = true;
        }
      }
      require(placed, "cannot place enclave antennas clear of the district cores; "
                      "increase spacing_m or enclave_radius_m");
    }

  City city;
  const int dwidth = n >= 100 ? 3 : 2;
  std::size_t next_antenna = 1;
  const auto add = [&](int d, Xy p, std::vector<std::uint32_t>& into) {
    const auto idx = city.registry.add_antenna(padded('A', next_antenna++, 4),
                                               to_geo(p, cfg.center),
                                               padded('D', static_cast<std::size_t>(d + 1), dwidth));
    into.push_back(idx.value);
  };
  city.residential.resize(n);
  city.hotspots.resize(n);
  city.enclaves.resize(n);
  for (int d = 0; d < n; ++d) {
    for (Xy p : res[d]) add(d, p, city.residential[d]);
    for (Xy p : hot[d]) add(d, p, city.hotspots[d]);
    for (Xy p : enc[d]) add(d, p, city.enclaves[d]);
    city.all_hotspots.insert(city.all_hotspots.end(), city.hotspots[d].begin(),
                             city.hotspots[d].end());
  }

  // Rent falls off linearly with the centroid's distance from the city center.
  double rmax = 0.0;
  for (int d = 0; d < n; ++d) rmax = std::max(rmax, std::hypot(centroids[d].x, centroids[d].y));
  std::vector<double> rent(n);
  for (int d = 0; d < n; ++d) {
    const double frac = rmax > 0 ? std::hypot(centroids[d].x, centroids[d].y) / rmax : 0.0;
    rent[d] = std::round((cfg.rent_max - (cfg.rent_max - cfg.rent_min) * frac) * 100.0) / 100.0;
    city.registry.set_district_attributes(padded('D', static_cast<std::size_t>(d + 1), dwidth),
                                          "District " + std::to_string(d + 1), rent[d]);
  }
  const auto [lo, hi] = std::minmax_element(rent.begin(), rent.end());
  std::vector<double> tiers(rent);
  std::sort(tiers.begin(), tiers.end());
  tiers.erase(std::unique(tiers.begin(), tiers.end()), tiers.end());
  require(tiers.size() >= 3, "rent gradient needs at least 3 distinct levels");
  city.rent_norm.resize(n);
  for (int d = 0; d < n; ++d) city.rent_norm[d] = (rent[d] - *lo) / (*hi - *lo);
  return city;
}

struct RawCall {
  cdr::Timestamp ts = 0;
  std::uint32_t user = 0;  // refugees first, then locals; matches id order
  std::uint32_t antenna = 0;
  std::uint32_t in_antenna = 0;
  std::uint32_t duration_s = 0;
  cdr::UserClass callee = cdr::UserClass::Unknown;
};

cdr::UserClass draw_callee(std::mt19937_64& rng, double unknown_share, double p_local) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < unknown_share) return cdr::UserClass::Unknown;
  return u01(rng) < p_local ? cdr::UserClass::Local : cdr::UserClass::Refugee;
}

double draw_rate(std::mt19937_64& rng, const PopulationConfig& p) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (u01(rng) < p.active_share)
    return p.active_rate_floor + std::exponential_distribution<double>(1.0 / p.active_rate_extra)(rng);
  return std::uniform_real_distribution<double>(p.inactive_rate_min, p.inactive_rate_max)(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Home district drawn with a Gaussian kernel on normalized rent around the
/// user's affordability; `exclude` (if >= 0) is left out.
int draw_district(std::mt19937_64& rng, const std::vector<double>& rent_norm, double afford,
                  double bandwidth, int exclude) {
  std::vector<double> w(rent_norm.size());
  for (std::size_t d = 0; d < w.size(); ++d) {
    const double z = (rent_norm[d] - afford) / bandwidth;
    w[d] = static_cast<int>(d) == exclude ? 0.0 : std::exp(-0.5 * z * z) + 1e-9;
  }
  std::discrete_distribution<int> dd(w.begin(), w.end());
  return dd(rng);
}

}  // namespace

// ---------------------------------------------------------------------------

void CityConfig::validate() const {
  require(grid_rows >= 1 && grid_cols >= 1 && n_districts() >= 3, "city needs at least 3 districts");
  require(residential_per_district >= 1 && hotspots_per_district >= 1 && enclaves_per_district >= 1,
          "every district needs residential, hotspot and enclave antennas");
  require(spacing_m > 0 && jitter_m >= 0 && core_radius_m > 0 && enclave_radius_m > core_radius_m,
          "city geometry must be positive with the enclave ring outside the core");
  require(center.valid(), "city center must be a valid coordinate");
  require(rent_max > rent_min && rent_min >= 0, "rent range must be increasing and non-negative");
  require(rent_tiers >= 3, "rent gradient needs at least 3 tiers");
}

void PopulationConfig::validate() const {
  require(n_locals >= 1 && n_refugees >= 1, "population needs locals and refugees");
  require(unit(kappa_mobility) && unit(kappa_routine) && unit(kappa_cost),
          "coupling strengths must lie in [0, 1]");
  require(unit(active_share) && unit(unknown_callee_share) && unit(local_to_local) &&
              unit(residential_day_share) && unit(move_base) && unit(move_cost_gain) &&
              move_base + move_cost_gain <= 1.0,
          "population shares must lie in [0, 1]");
  require(active_rate_floor > 0 && active_rate_extra > 0 && inactive_rate_min > 0 &&
              inactive_rate_max >= inactive_rate_min,
          "call rates must be positive");
  require(affordability_bandwidth > 0 && mean_duration_s > 0, "bandwidth and duration must be positive");
}

void EventConfig::validate() const {
  require(unit(severity), "event severity must lie in [0, 1]");
  require(low_il_multiplier >= 0, "low-IL multiplier must be non-negative");
}

double EventConfig::factor(double il_target) const noexcept {
  return std::max(0.0, 1.0 - severity * (1.0 + low_il_multiplier * (1.0 - il_target)));
}

void SynthConfig::validate() const {
  city.validate();
  population.validate();
  for (const auto& e : events) e.validate();
  require(year >= 1971 && year <= 9998, "study year out of range");
}

std::array<double, 24> local_profile() {
  return normalized({0.3, 0.15, 0.1, 0.1, 0.1, 0.2, 0.4, 0.8, 1.5, 3.0, 3.5, 3.5,
                     3.0, 3.2, 3.5, 3.5, 3.2, 3.0, 2.0, 1.2, 0.8, 0.6, 0.5, 0.4});
}

std::array<double, 24> refugee_profile() {
  return normalized({3.0, 2.5, 1.8, 1.0, 0.5, 0.3, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8,
                     0.8, 0.8, 0.8, 0.9, 1.0, 1.2, 1.6, 2.0, 2.8, 3.2, 3.4, 3.3});
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  const auto& pop = config.population;
  const cdr::StudyYear year(config.year);
  City city = build_city(config.city, config.seed);
  const int n_districts = config.city.n_districts();
  const auto n_antennas = static_cast<std::uint32_t>(city.registry.antenna_count());
  const int n_days = year.n_days();

  std::vector<int> month_of_day(n_days);
  for (int d = 0; d < n_days; ++d) month_of_day[d] = year.month_of(year.day(d));

  const auto p_loc = local_profile();
  const auto p_ref = refugee_profile();

  std::vector<RawCall> calls;
  calls.reserve(static_cast<std::size_t>(pop.n_locals + pop.n_refugees) * n_days * 4);
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(pop.n_locals + pop.n_refugees));

  SynthData out;
  std::vector<RawCall> shared_trace;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> second_of_hour(0, 3599);
  std::exponential_distribution<double> duration(1.0 / pop.mean_duration_s);
  const auto call_at = [&](std::mt19937_64& rng, std::uint32_t user, cdr::Timestamp ts,
                           std::uint32_t antenna, cdr::UserClass callee) {
    RawCall c;
    c.ts = ts;
    c.user = user;
    c.antenna = antenna;
    c.callee = callee;
    c.in_antenna = static_cast<std::uint32_t>(pick(rng, n_antennas));
    c.duration_s = static_cast<std::uint32_t>(std::max(1.0, std::round(duration(rng))));
    calls.push_back(c);
  };

  for (int i = 0; i < pop.n_refugees; ++i) {
    auto rng = stream_rng(config.seed, 1, static_cast<std::uint32_t>(i));
    const auto user = static_cast<std::uint32_t>(ids.size());
    ids.push_back(padded('1', static_cast<std::size_t>(i + 1), 7));

    const double il = u01(rng);
    // The shared template is shaped as a mid-IL, active user so the control
    // trace reaches locals and passes the activity filter.
    const bool template_user = pop.shared_refugee_trace && i == 0;
    const double il_shape = template_user ? 0.5 : il;
    const double afford = pop.kappa_cost * il_shape + (1.0 - pop.kappa_cost) * u01(rng);
    int home = draw_district(rng, city.rent_norm, afford, pop.affordability_bandwidth, -1);
    const auto pick_enclave = [&](int d) { return city.enclaves[d][pick(rng, city.enclaves[d].size())]; };
    std::uint32_t home_antenna = pick_enclave(home);
    const auto pick_day_spot = [&](int d) {
      return u01(rng) < pop.residential_day_share
                 ? city.residential[d][pick(rng, city.residential[d].size())]
                 : pick_enclave(d);
    };
    std::uint32_t day_spot = pick_day_spot(home);
    const std::uint32_t work = city.all_hotspots[pick(rng, city.all_hotspots.size())];
    double rate = draw_rate(rng, pop);
    if (template_user) rate = pop.active_rate_floor + pop.active_rate_extra;
    const double a = pop.kappa_routine * il_shape;
    const double q0 = pop.kappa_mobility * il_shape;

    std::array<double, 24> mix;
    for (int h = 0; h < 24; ++h) mix[h] = (1.0 - a) * p_ref[h] + a * p_loc[h];
    std::discrete_distribution<int> hour_dist(mix.begin(), mix.end());
    std::poisson_distribution<int> daily(rate);

    out.truth.push_back(GroundTruthRow{ids.back(), il, city.registry.district(cdr::DistrictIndex{
                                                           static_cast<std::uint32_t>(home)}).id,
                                       a, q0, rate});

    if (pop.shared_refugee_trace && i > 0) {
      for (const auto& t : shared_trace)
        call_at(rng, user, t.ts, t.antenna, draw_callee(rng, pop.unknown_callee_share, il));
      out.truth.back().home_district = out.truth.front().home_district;
      out.truth.back().daily_rate = out.truth.front().daily_rate;
      continue;
    }
    const std::size_t first_call = calls.size();
    int month = 1;
    for (int d = 0; d < n_days; ++d) {
      const cdr::Timestamp day_ts = year.day(d);
      if (month_of_day[d] != month) {
        month = month_of_day[d];
        const double p_move = pop.move_base + pop.kappa_cost * pop.move_cost_gain * city.rent_norm[home];
        if (u01(rng) < p_move && n_districts > 1) {
          home = draw_district(rng, city.rent_norm, afford, pop.affordability_bandwidth, home);
          home_antenna = pick_enclave(home);
          day_spot = pick_day_spot(home);
        }
      }
      double q = q0;
      for (const auto& e : config.events)
        if (day_ts > e.date) q *= e.factor(il_shape);
      const int n = daily(rng);
      for (int k = 0; k < n; ++k) {
        const int hour = hour_dist(rng);
        const cdr::Timestamp ts = day_ts + hour * cdr::kSecondsPerHour + second_of_hour(rng);
        std::uint32_t antenna;
        if (hour >= 20 || hour < 8) antenna = home_antenna;
        else antenna = u01(rng) < q ? work : day_spot;
        call_at(rng, user, ts, antenna, draw_callee(rng, pop.unknown_callee_share, il));
      }
    }
    if (template_user) shared_trace.assign(calls.begin() + first_call, calls.end());
  }

  for (int i = 0; i < pop.n_locals; ++i) {
    auto rng = stream_rng(config.seed, 2, static_cast<std::uint32_t>(i));
    const auto user = static_cast<std::uint32_t>(ids.size());
    ids.push_back(padded('2', static_cast<std::size_t>(i + 1), 7));
    const int home_d = static_cast<int>(pick(rng, static_cast<std::size_t>(n_districts)));
    const std::uint32_t home = city.residential[home_d][pick(rng, city.residential[home_d].size())];
    const std::uint32_t work = city.all_hotspots[pick(rng, city.all_hotspots.size())];
    const double rate = draw_rate(rng, pop);
    std::discrete_distribution<int> hour_dist(p_loc.begin(), p_loc.end());
    std::poisson_distribution<int> daily(rate);
    for (int d = 0; d < n_days; ++d) {
      const cdr::Timestamp day_ts = year.day(d);
      const int n = daily(rng);
      for (int k = 0; k < n; ++k) {
        const int hour = hour_dist(rng);
        const cdr::Timestamp ts = day_ts + hour * cdr::kSecondsPerHour + second_of_hour(rng);
        const std::uint32_t antenna = (hour >= 9 && hour <= 17) ? work : home;
        call_at(rng, user, ts, antenna, draw_callee(rng, pop.unknown_callee_share, pop.local_to_local));
      }
    }
  }

  std::stable_sort(calls.begin(), calls.end(), [](const RawCall& x, const RawCall& y) {
    return x.ts != y.ts ? x.ts < y.ts : x.user < y.user;
  });

  Dataset& ds = out.dataset;
  ds.year = year;
  ds.registry = std::move(city.registry);
  std::vector<std::optional<cdr::UserIndex>> interned(ids.size());
  ds.fgmd.reserve(calls.size());
  ds.cgmd.reserve(calls.size());
  for (const auto& c : calls) {
    auto& u = interned[c.user];
    if (!u) u = ds.users.intern(ids[c.user]);
    cdr::CallRecord r;
    r.ts = c.ts;
    r.caller = *u;
    r.caller_class = ds.users.cls(*u);
    r.callee_class = c.callee;
    r.site = c.antenna;
    r.site_kind = cdr::SiteKind::Antenna;
    ds.fgmd.push_back(r);
    r.callee_class = cdr::UserClass::Unknown;
    r.site = ds.registry.antenna(cdr::AntennaIndex{c.antenna}).district.value;
    r.site_kind = cdr::SiteKind::District;
    ds.cgmd.push_back(r);
  }

  // Antenna-to-antenna hourly traffic aggregated from the same calls.
  struct Key {
    cdr::Timestamp hour;
    std::uint32_t out, in;
    auto operator<=>(const Key&) const = default;
  };
  std::vector<std::pair<Key, std::uint32_t>> keyed;
  keyed.reserve(calls.size());
  for (std::uint32_t i = 0; i < calls.size(); ++i)
    keyed.push_back({Key{calls[i].ts - calls[i].ts % cdr::kSecondsPerHour, calls[i].antenna,
                         calls[i].in_antenna},
                     i});
  std::sort(keyed.begin(), keyed.end());
  for (std::size_t i = 0; i < keyed.size();) {
    cdr::TrafficRecord t;
    t.ts = keyed[i].first.hour;
    t.out_antenna = cdr::AntennaIndex{keyed[i].first.out};
    t.in_antenna = cdr::AntennaIndex{keyed[i].first.in};
    std::size_t j = i;
    for (; j < keyed.size() && keyed[j].first == keyed[i].first; ++j) {
      const auto& c = calls[keyed[j].second];
      ++t.total_calls;
      t.total_duration_s += c.duration_s;
      if (c.user < static_cast<std::uint32_t>(pop.n_refugees)) {
        ++t.refugee_calls;
        t.refugee_duration_s += c.duration_s;
      }
    }
    ds.atd.push_back(t);
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class FastWriter {
 public:
  explicit FastWriter(const std::string& path) : path_(path), f_(std::fopen(path.c_str(), "wb")) {
    if (!f_) throw Error(ErrorCode::Io, "cannot open '" + path + "' for writing");
    buf_.reserve(1 << 20);
  }
  ~FastWriter() {
    if (f_) std::fclose(f_);
  }
  FastWriter(const FastWriter&) = delete;
  FastWriter& operator=(const FastWriter&) = delete;

  std::string& buf() { return buf_; }
  void maybe_flush() {
    if (buf_.size() >= (1 << 20)) flush();
  }
  void close() {
    flush();
    if (std::fclose(f_) != 0) {
      f_ = nullptr;
      throw Error(ErrorCode::Io, "failed writing '" + path_ + "'");
    }
    f_ = nullptr;
  }

 private:
  void flush() {
    if (!buf_.empty() && std::fwrite(buf_.data(), 1, buf_.size(), f_) != buf_.size())
      throw Error(ErrorCode::Io, "failed writing '" + path_ + "'");
    buf_.clear();
  }
  std::string path_;
  std::FILE* f_;
  std::string buf_;
};

/// Timestamp formatting with a per-day cache of the date part.
class TsFormatter {
 public:
  void append(std::string& out, cdr::Timestamp t) {
    const cdr::Timestamp day = cdr::day_start(t);
    if (day != day_) {
      day_ = day;
      date_ = cdr::format_date(day);
    }
    const auto s = static_cast<int>(t - day);
    char hms[10];
    std::snprintf(hms, sizeof hms, "T%02d:%02d:%02d", s / 3600, (s / 60) % 60, s % 60);
    out += date_;
    out += hms;
  }

 private:
  cdr::Timestamp day_ = -1;
  std::string date_;
};

char prefix_char(cdr::UserClass c) {
  switch (c) {
    case cdr::UserClass::Refugee: return '1';
    case cdr::UserClass::Local: return '2';
    case cdr::UserClass::Unknown: break;
  }
  return '3';
}

}  // namespace

InputPaths synth_paths(const std::string& dir) {
  const std::filesystem::path p(dir);
  return InputPaths{(p / "fgmd.csv").string(), (p / "cgmd.csv").string(), (p / "atd.csv").string(),
                    (p / "antennas.csv").string(), (p / "districts.csv").string()};
}

void write_ground_truth(std::span<const GroundTruthRow> rows, const std::string& path) {
  text::CsvWriter w(path);
  w.row({"user_id", "il_target", "home_district"});
  for (const auto& r : rows) {
    w.field(r.user_id).field(r.il_target).field(r.home_district);
    w.end_row();
  }
  w.close();
}

void write_synth(const SynthData& data, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create directory '" + dir + "': " + ec.message());
  const auto paths = synth_paths(dir);
  const Dataset& ds = data.dataset;
  const auto& reg = ds.registry;

  {
    text::CsvWriter w(paths.antennas);
    w.field(cdr::kAntennaHeader);
    w.end_row();
    for (const auto& a : reg.antennas()) {
      w.field(a.id).field(a.location.lat).field(a.location.lon).field(reg.district(a.district).id);
      w.end_row();
    }
    w.close();
  }
  {
    text::CsvWriter w(paths.districts);
    w.field(cdr::kDistrictHeader);
    w.end_row();
    for (const auto& d : reg.districts()) {
      w.field(d.id).field(d.name).field(d.rent_cost_per_m2.value_or(0.0));
      w.end_row();
    }
    w.close();
  }

  TsFormatter tsf;
  {
    FastWriter w(paths.fgmd);
    w.buf() += cdr::kFgmdHeader;
    w.buf() += '\n';
    for (const auto& r : ds.fgmd) {
      auto& b = w.buf();
      b += ds.users.raw(r.caller);
      b += ',';
      tsf.append(b, r.ts);
      b += ',';
      b += prefix_char(r.callee_class);
      b += ',';
      b += reg.antenna(r.antenna()).id;
      b += '\n';
      w.maybe_flush();
    }
    w.close();
  }
  {
    FastWriter w(paths.cgmd);
    w.buf() += cdr::kCgmdHeader;
    w.buf() += '\n';
    for (const auto& r : ds.cgmd) {
      auto& b = w.buf();
      b += ds.users.raw(r.caller);
      b += ',';
      tsf.append(b, r.ts);
      b += ',';
      b += reg.district(r.district()).id;
      b += '\n';
      w.maybe_flush();
    }
    w.close();
  }
  {
    FastWriter w(paths.atd);
    w.buf() += cdr::kAtdHeader;
    w.buf() += '\n';
    for (const auto& t : ds.atd) {
      auto& b = w.buf();
      tsf.append(b, t.ts);
      b += ',';
      b += reg.antenna(t.out_antenna).id;
      b += ',';
      b += reg.antenna(t.in_antenna).id;
      for (std::int64_t v : {t.total_calls, t.refugee_calls, t.total_duration_s, t.refugee_duration_s}) {
        b += ',';
        b += std::to_string(v);
      }
      b += '\n';
      w.maybe_flush();
    }
    w.close();
  }
  write_ground_truth(data.truth, (std::filesystem::path(dir) / "ground_truth.csv").string());
}

ConsistencyReport consistency_check(std::span<const cdr::CallRecord> fgmd,
                                    std::span<const cdr::TrafficRecord> atd,
                                    const cdr::Registry& registry) {
  struct Counts {
    std::int64_t total = 0, refugee = 0;
  };
  using Key = std::pair<cdr::Timestamp, std::uint32_t>;
  std::map<Key, std::pair<Counts, Counts>> agg;  // first: FGMD, second: ATD
  for (const auto& r : fgmd) {
    if (r.site_kind != cdr::SiteKind::Antenna)
      throw Error(ErrorCode::Inconsistent, "consistency check needs antenna-level records");
    auto& c = agg[{r.ts - r.ts % cdr::kSecondsPerHour, r.site}].first;
    ++c.total;
    if (r.caller_class == cdr::UserClass::Refugee) ++c.refugee;
  }
  for (const auto& t : atd) {
    auto& c = agg[{t.ts - t.ts % cdr::kSecondsPerHour, t.out_antenna.value}].second;
    c.total += t.total_calls;
    c.refugee += t.refugee_calls;
  }
  for (const auto& [key, pair] : agg) {
    const auto& [f, a] = pair;
    if (f.total != a.total || f.refugee != a.refugee)
      throw Error(ErrorCode::Inconsistent,
                  "antenna " + registry.antenna(cdr::AntennaIndex{key.second}).id + " hour " +
                      cdr::format_timestamp(key.first) + ": FGMD " + std::to_string(f.total) +
                      " calls (" + std::to_string(f.refugee) + " refugee), ATD " +
                      std::to_string(a.total) + " (" + std::to_string(a.refugee) + ")");
  }
  return ConsistencyReport{agg.size()};
}

}  // namespace cdrstig::synth
