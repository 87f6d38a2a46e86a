#include "cdrstig/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <cmath>
#include <numeric>
#include <thread>

#include "cdrstig/error.hpp"

namespace cdrstig::pipeline {

using cdr::CallRecord;
using cdr::DistrictIndex;
using cdr::UserClass;
using cdr::UserIndex;

namespace {

std::uint64_t splitmix(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : kNaN;
}

std::string period_label(const cdr::Period& p) {
  return std::to_string(p.index) + "@" + cdr::format_date(p.start);
}

/// Runs fn(i) for i in [0, n) on `workers` threads. fn must only touch its
/// own output slot.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::optional<stats::CorrelationResult> try_pearson(std::span<const double> x,
                                                    std::span<const double> y, std::size_t n_perm,
                                                    std::uint64_t seed, RunLog& log,
                                                    const std::string& scope,
                                                    const std::string& item) {
  try {
    return stats::pearson(x, y, n_perm, seed);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::TooFewSamples || e.code() == ErrorCode::ZeroVariance) {
      log.skip(scope, item, std::string(to_string(e.code())));
      return std::nullopt;
    }
    throw;
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) noexcept {
  return splitmix(base ^ splitmix(a ^ splitmix(b ^ splitmix(c))));
}

int il_group(double il, int n_groups) {
  if (n_groups == metrics::kIlBins) return metrics::il_bin(il);
  if (!(il >= 0.0 && il <= 1.0))
    throw Error(ErrorCode::OutOfRange, "interaction level outside [0, 1]");
  int g = 1;
  for (int k = 1; k < n_groups; ++k)
    if (il >= static_cast<double>(k) / n_groups) ++g;
  return g;
}

Summary summarize(std::span<const double> values) {
  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  Summary s;
  s.n = v.size();
  if (v.empty()) return s;
  const auto q = stats::quartiles(v);
  s.q1 = q.q1;
  s.median = q.q2;
  s.q3 = q.q3;
  return s;
}

std::optional<double> impact_ratio(double before, double after) noexcept {
  if (!(after != 0.0) || !std::isfinite(after) || !std::isfinite(before)) return std::nullopt;
  return before / after;
}

std::string_view to_string(ImpactMeasure m) noexcept {
  return m == ImpactMeasure::Ms ? "MS" : "PctCallsToLocals";
}

// ---------------------------------------------------------------------------

Prepared prepare(const RunConfig& config, const Dataset& data) {
  config.validate();
  Prepared p;
  p.data = &data;
  p.config = config;
  const auto& year = data.year;

  auto& records = p.log.funnels["fgmd_records"];
  records.push_back({"ingested", data.fgmd.size()});
  const auto kept = cdr::drop_unknown_callee(data.fgmd);
  records.push_back({"known_callee", kept.kept.size()});
  auto part = cdr::partition_periods(kept.kept, year, config.period_scheme);
  records.push_back({"in_periods", kept.kept.size() - part.discarded});

  cdr::UserSet refugees_seen, refugees_active, refugees_with_il;
  for (const auto& r : data.fgmd)
    if (r.caller_class == UserClass::Refugee) refugees_seen.insert(r.caller);

  std::size_t active_records = 0;
  p.period_of_day.assign(static_cast<std::size_t>(year.n_days()), -1);
  for (const auto& period : cdr::periods_of(year, config.period_scheme)) {
    PeriodData pd;
    pd.period = period;
    const auto it = part.buckets.find(period);
    static const std::vector<CallRecord> kNone;
    const auto& recs = it == part.buckets.end() ? kNone : it->second;
    pd.active = cdr::filter_active_users(recs, period, config.min_avg_calls_per_day);
    for (const auto& r : recs)
      if (pd.active.contains(r.caller)) pd.by_user[r.caller].push_back(r);
    for (const auto& [u, urecs] : pd.by_user) {
      active_records += urecs.size();
      if (urecs.front().caller_class != UserClass::Refugee) continue;
      refugees_active.insert(u);
      try {
        pd.refugee_il[u] = metrics::interaction_level(urecs);
        refugees_with_il.insert(u);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoCalls) throw;
      }
    }
    const int first = year.day_index(period.start);
    for (int d = first; d < first + period.n_days && d < year.n_days(); ++d)
      p.period_of_day[static_cast<std::size_t>(d)] = static_cast<int>(p.periods.size());
    p.periods.push_back(std::move(pd));
  }
  records.push_back({"by_active_users", active_records});
  p.log.funnels["fgmd_refugees"] = {{"callers", refugees_seen.size()},
                                    {"active_in_any_period", refugees_active.size()},
                                    {"with_interaction_level", refugees_with_il.size()}};
  if (part.discarded > 0) p.log.skip("records", "uncovered_trailing_days", std::to_string(part.discarded));
  p.log.seeds["stats.seed"] = config.stats.seed;
  return p;
}

// ---------------------------------------------------------------------------

namespace {

std::optional<metrics::CallingPattern> period_lcp(const PeriodData& pd) {
  std::vector<metrics::CallingPattern> pats;
  for (const auto& [u, recs] : pd.by_user)
    if (recs.front().caller_class == UserClass::Local) pats.push_back(metrics::calling_pattern(recs));
  if (pats.empty()) return std::nullopt;
  return metrics::local_average_pattern(pats);
}

}  // namespace

CrIlResult run_cr_il(Prepared& prep) {
  const auto& cfg = prep.config;
  CrIlResult out;
  out.n_periods_total = prep.periods.size();
  std::vector<double> rs, ps;
  for (const auto& pd : prep.periods) {
    const auto label = period_label(pd.period);
    const auto lcp = period_lcp(pd);
    if (!lcp) {
      prep.log.skip("cr_il_period", label, "NoLocals");
      continue;
    }
    std::vector<double> cr, il;
    for (const auto& [u, value] : pd.refugee_il) {
      cr.push_back(metrics::calling_regularity(metrics::calling_pattern(pd.by_user.at(u)), *lcp,
                                               cfg.stats.cr_mode));
      il.push_back(value);
    }
    const auto seed = derive_seed(cfg.stats.seed, 1, static_cast<std::uint64_t>(pd.period.index));
    prep.log.seeds["cr_il.period_" + std::to_string(pd.period.index)] = seed;
    const auto res = try_pearson(cr, il, cfg.stats.n_perm, seed, prep.log, "cr_il_period", label);
    if (!res) continue;
    out.rows.push_back(CrIlRow{pd.period.index, pd.period.start, cr.size(), res->r, res->p});
    rs.push_back(res->r);
    ps.push_back(res->p);
  }
  out.r = summarize(rs);
  if (!ps.empty()) {
    out.p_min = *std::min_element(ps.begin(), ps.end());
    out.p_max = *std::max_element(ps.begin(), ps.end());
  }
  return out;
}

std::vector<UserMetricRow> user_metrics(Prepared& prep) {
  std::vector<UserMetricRow> rows;
  for (const auto& pd : prep.periods) {
    const auto lcp = period_lcp(pd);
    if (!lcp) prep.log.skip("metrics_period", period_label(pd.period), "NoLocals");
    for (const auto& [u, il] : pd.refugee_il) {
      UserMetricRow row;
      row.period = pd.period.index;
      row.user_id = prep.data->users.raw(u);
      row.il = il;
      row.il_bin = il_group(il, prep.config.stats.n_groups);
      if (lcp)
        row.cr = metrics::calling_regularity(metrics::calling_pattern(pd.by_user.at(u)), *lcp,
                                             prep.config.stats.cr_mode);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------

DistrictResult run_district_analysis(Prepared& prep) {
  const Dataset& ds = *prep.data;
  const auto& cfg = prep.config;
  const auto& reg = ds.registry;
  auto& log = prep.log;
  if (ds.cgmd.empty()) throw Error(ErrorCode::Empty, "district analysis needs CGMD records");

  std::set<DistrictIndex> area;
  if (cfg.study_area.empty()) {
    for (std::uint32_t d = 0; d < reg.district_count(); ++d) area.insert(DistrictIndex{d});
  } else {
    for (const auto& id : cfg.study_area) {
      const auto d = reg.find_district(id);
      if (!d) throw Error(ErrorCode::UnknownDistrict, "study area district '" + id + "' is not in the registry");
      area.insert(*d);
    }
  }

  const auto residences = metrics::infer_residences(ds.cgmd, ds.year, reg, UserClass::Refugee);
  const auto long_term = metrics::long_term_residents(residences, cfg.long_term_min_months, &area);
  {
    cdr::UserSet callers, resident;
    for (const auto& r : ds.cgmd)
      if (r.caller_class == UserClass::Refugee) callers.insert(r.caller);
    for (const auto& r : residences) resident.insert(r.user);
    log.funnels["cgmd_refugees"] = {{"callers", callers.size()},
                                    {"with_residence", resident.size()},
                                    {"long_term_residents", long_term.size()}};
  }
  std::vector<metrics::Residence> lt;
  std::map<std::pair<UserIndex, int>, DistrictIndex> home;
  for (const auto& r : residences)
    if (long_term.contains(r.user) && area.contains(r.district)) {
      lt.push_back(r);
      home[{r.user, r.month}] = r.district;
    }

  // Monthly local averages and refugee patterns from CGMD.
  const auto months = cdr::partition_periods(ds.cgmd, ds.year, cdr::PeriodScheme::CalendarMonth);
  std::array<std::optional<metrics::CallingPattern>, 13> lcp;
  std::map<std::pair<DistrictIndex, int>, std::vector<double>> cr_by_dm;
  std::map<DistrictIndex, std::vector<metrics::CallingPattern>> patterns_by_district;
  for (const auto& [period, recs] : months.buckets) {
    const int m = period.index;
    const auto active = cdr::filter_active_users(recs, period, cfg.min_avg_calls_per_day);
    std::map<UserIndex, std::vector<CallRecord>> locals, refugees;
    for (const auto& r : recs) {
      if (r.caller_class == UserClass::Local && active.contains(r.caller)) locals[r.caller].push_back(r);
      else if (r.caller_class == UserClass::Refugee && home.contains({r.caller, m}))
        refugees[r.caller].push_back(r);
    }
    std::vector<metrics::CallingPattern> lp;
    for (const auto& [u, urecs] : locals) lp.push_back(metrics::calling_pattern(urecs));
    if (lp.empty()) {
      log.skip("district_month", std::to_string(m), "NoLocals");
      continue;
    }
    lcp[static_cast<std::size_t>(m)] = metrics::local_average_pattern(lp);
    for (const auto& [u, urecs] : refugees) {
      const auto pat = metrics::calling_pattern(urecs);
      const DistrictIndex d = home.at({u, m});
      cr_by_dm[{d, m}].push_back(
          metrics::calling_regularity(pat, *lcp[static_cast<std::size_t>(m)], cfg.stats.cr_mode));
      patterns_by_district[d].push_back(pat);
    }
  }

  const auto night = metrics::night_traffic(ds.atd, reg, ds.year);
  DistrictResult out;
  std::map<DistrictIndex, std::vector<const DistrictMonthRow*>> rows_of;
  out.months.reserve(area.size() * 12);
  for (DistrictIndex d : area) {
    for (int m = 1; m <= 12; ++m) {
      DistrictMonthRow row;
      row.district = reg.district(d).id;
      row.month = m;
      row.n_residents = static_cast<std::size_t>(std::count_if(lt.begin(), lt.end(), [&](const auto& r) {
        return r.district == d && r.month == m;
      }));
      if (const auto it = cr_by_dm.find({d, m}); it != cr_by_dm.end()) row.mean_cr = mean_of(it->second);
      if (const auto it = night.find({d, m}); it != night.end() && it->second.total > 0)
        row.ri = metrics::residential_inclusion(it->second);
      if (row.n_residents > 0 && m < 12) row.da = metrics::district_attractiveness(lt, d, m);
      out.months.push_back(row);
    }
  }
  for (const auto& row : out.months) rows_of[*reg.find_district(row.district)].push_back(&row);

  // (a) per-district correlation of monthly mean CR with monthly RI.
  std::vector<double> ri_cr_rs;
  for (DistrictIndex d : area) {
    std::vector<double> cr, ri;
    for (const auto* row : rows_of[d])
      if (std::isfinite(row->mean_cr) && std::isfinite(row->ri)) {
        cr.push_back(row->mean_cr);
        ri.push_back(row->ri);
      }
    const auto& id = reg.district(d).id;
    const auto seed = derive_seed(cfg.stats.seed, 2, d.value);
    log.seeds["district.ri_cr." + id] = seed;
    if (const auto res = try_pearson(cr, ri, cfg.stats.n_perm, seed, log, "district_ri_cr", id)) {
      out.ri_cr.push_back(DistrictCorrelationRow{id, cr.size(), res->r, res->p});
      ri_cr_rs.push_back(res->r);
    }
  }
  out.ri_cr_summary = summarize(ri_cr_rs);

  // Yearly local average pattern.
  metrics::CallingPattern lcp_year;
  {
    std::vector<metrics::CallingPattern> ms;
    for (const auto& l : lcp)
      if (l) ms.push_back(*l);
    if (ms.empty()) throw Error(ErrorCode::NoLocals, "no month has active locals");
    lcp_year = metrics::local_average_pattern(ms);
  }

  for (DistrictIndex d : area) {
    const auto& dist = reg.district(d);
    DistrictRow row;
    row.district = dist.id;
    if (dist.rent_cost_per_m2) row.rent = *dist.rent_cost_per_m2;
    else log.skip("district", dist.id, "NoRentCost");
    std::vector<double> crs, das, ris;
    for (const auto* mr : rows_of[d]) {
      row.resident_months += mr->n_residents;
      das.push_back(mr->da);
      ris.push_back(mr->ri);
    }
    for (int m = 1; m <= 12; ++m)
      if (const auto it = cr_by_dm.find({d, m}); it != cr_by_dm.end())
        crs.insert(crs.end(), it->second.begin(), it->second.end());
    row.mean_ri = mean_of(ris);
    if (!std::isfinite(row.mean_ri)) log.skip("district", dist.id, "NoNightTraffic");
    if (row.resident_months == 0 || crs.empty()) {
      log.skip("district", dist.id, "NoResidents");
      out.districts.push_back(row);
      continue;
    }
    row.mean_cr = mean_of(crs);
    row.mean_da = mean_of(das);
    const auto& pats = patterns_by_district[d];
    std::array<double, metrics::kHours> mean_pat{};
    for (const auto& p : pats)
      for (std::size_t h = 0; h < mean_pat.size(); ++h) mean_pat[h] += p.values[h] / static_cast<double>(pats.size());
    row.euclidean = stats::series_distance(mean_pat, lcp_year.values, stats::SeriesMeasure::Euclidean);
    row.cosine = stats::series_distance(mean_pat, lcp_year.values, stats::SeriesMeasure::Cosine);
    row.dtw = stats::series_distance(mean_pat, lcp_year.values, stats::SeriesMeasure::Dtw);
    out.districts.push_back(row);
  }

  // (b)-(d) cross-district correlations with rent cost.
  const auto against_rent = [&](const std::string& name, double DistrictRow::*field) {
    std::vector<double> x, y;
    for (const auto& r : out.districts)
      if (std::isfinite(r.rent) && std::isfinite(r.*field)) {
        x.push_back(r.*field);
        y.push_back(r.rent);
      }
    const auto seed = derive_seed(cfg.stats.seed, 2, 1'000'000, std::hash<std::string>{}(name) & 0xFFFF);
    log.seeds["district." + name] = seed;
    if (const auto res = try_pearson(x, y, cfg.stats.n_perm, seed, log, "district_correlation", name))
      out.correlations.push_back(NamedCorrelation{name, x.size(), res->r, res->p});
  };
  against_rent("da_cost", &DistrictRow::mean_da);
  against_rent("cr_cost", &DistrictRow::mean_cr);
  against_rent("euclidean_cost", &DistrictRow::euclidean);
  against_rent("cosine_cost", &DistrictRow::cosine);
  against_rent("dtw_cost", &DistrictRow::dtw);

  // (e) spatial lag model of mean CR on normalized rent, DA and RI.
  {
    std::vector<const DistrictRow*> use;
    for (const auto& r : out.districts)
      if (std::isfinite(r.rent) && std::isfinite(r.mean_cr) && std::isfinite(r.mean_da) &&
          std::isfinite(r.mean_ri))
        use.push_back(&r);
    try {
      const auto n = static_cast<Eigen::Index>(use.size());
      std::vector<double> y, rent, da, ri;
      std::vector<geo::GeoPoint> centroids;
      for (const auto* r : use) {
        y.push_back(r->mean_cr);
        rent.push_back(r->rent);
        da.push_back(r->mean_da);
        ri.push_back(r->mean_ri);
        const auto c = reg.district_centroid(*reg.find_district(r->district));
        if (!c) throw Error(ErrorCode::DegenerateGeometry, "district " + r->district + " has no antennas");
        centroids.push_back(*c);
      }
      if (use.size() < 6) throw Error(ErrorCode::TooFewSamples, "spatial lag model needs 6 districts");
      Eigen::MatrixXd x(n, 3);
      const std::array<std::vector<double>*, 3> cols{&rent, &da, &ri};
      for (Eigen::Index j = 0; j < 3; ++j) {
        const auto norm = stats::min_max_normalize(*cols[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 0; i < n; ++i) x(i, j) = norm.values[static_cast<std::size_t>(i)];
      }
      const auto dm = geo::district_distance_matrix(centroids, true);
      const auto w = stats::build_weight_matrix(dm, cfg.stats.weights, cfg.stats.row_standardize,
                                                cfg.stats.inverse_epsilon);
      stats::LagFitOptions opts;
      opts.n_perm = cfg.stats.n_perm;
      opts.seed = derive_seed(cfg.stats.seed, 5);
      log.seeds["district.table2_moran"] = opts.seed;
      LagTable t;
      for (const auto* r : use) t.districts.push_back(r->district);
      t.model = stats::spatial_lag_regress(y, x, w, opts);
      out.table2 = std::move(t);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::Input) throw;
      log.skip("table2", "lag_model", std::string(to_string(e.code())));
    }
  }

  out.ri_histogram.assign(10, 0);
  for (const auto& r : out.months)
    if (std::isfinite(r.ri))
      ++out.ri_histogram[static_cast<std::size_t>(std::min(9, static_cast<int>(r.ri * 10.0)))];
  return out;
}

// ---------------------------------------------------------------------------

DailyMs compute_daily_ms(Prepared& prep) {
  const Dataset& ds = *prep.data;
  const auto& cfg = prep.config;
  const auto& engine = cfg.engine;
  const int n_groups = cfg.stats.n_groups;
  const int n_trials = cfg.stats.n_trials;
  if (ds.registry.antenna_count() == 0) {
    prep.log.skip("ms", "all_days", "NoAntennas");
    prep.log.funnels["ms_days"] = {{"days_in_year", static_cast<std::size_t>(ds.year.n_days())},
                                   {"in_periods", 0},
                                   {"with_all_groups", 0}};
    return {};
  }
  const geo::GridSpec raster = metrics::mobility_raster(ds.registry, engine);
  const stig::Footprint footprint(engine.mark, engine.cell_size_m);
  std::vector<geo::Cell> antenna_cell;
  for (const auto& a : ds.registry.antennas()) antenna_cell.push_back(geo::cell_of(a.location, raster));

  const int n_days = ds.year.n_days();
  std::vector<std::vector<const CallRecord*>> day_records(static_cast<std::size_t>(n_days));
  for (const auto& pd : prep.periods)
    for (const auto& [u, recs] : pd.by_user)
      for (const auto& r : recs) day_records[static_cast<std::size_t>(ds.year.day_index(r.ts))].push_back(&r);

  struct DayOut {
    std::vector<MsCell> cells;
    std::vector<Skip> skipped;
  };
  std::vector<DayOut> days(static_cast<std::size_t>(n_days));
  const std::size_t n_users = ds.users.size();

  parallel_for(static_cast<std::size_t>(n_days), cfg.workers, [&](std::size_t di) {
    const int day = static_cast<int>(di);
    const int pos = prep.period_of_day[di];
    if (pos < 0) return;
    const auto& pd = prep.periods[static_cast<std::size_t>(pos)];
    const cdr::Timestamp day_ts = ds.year.day(day);
    const std::string date = cdr::format_date(day_ts);
    DayOut& out = days[di];

    std::map<int, cdr::UserSet> groups;
    for (int g = 1; g <= n_groups; ++g) groups[g];
    for (const auto& [u, il] : pd.refugee_il) groups[il_group(il, n_groups)].insert(u);
    for (const auto& [u, recs] : pd.by_user)
      if (recs.front().caller_class == UserClass::Local) groups[0].insert(u);
    for (const auto& [g, members] : groups)
      if (members.empty()) {
        out.skipped.push_back(Skip{"ms_day", date, g == 0 ? "NoLocals" : "EmptyGroup"});
        return;
      }

    const stig::StepWindow window{stig::step_of(day_ts, engine.step_seconds),
                                  stig::step_of(day_ts + cdr::kSecondsPerDay - 1, engine.step_seconds)};
    std::vector<int> tag(n_users, -1);
    for (int t = 0; t < n_trials; ++t) {
      const auto seed = derive_seed(cfg.stats.seed, 3, di, static_cast<std::uint64_t>(t));
      const auto sub = metrics::subsample_equal_groups(groups, seed);
      for (const auto& [g, members] : sub)
        for (UserIndex u : members) tag[u.value] = g;
      std::vector<std::vector<stig::CellSample>> samples(static_cast<std::size_t>(n_groups + 1));
      for (const CallRecord* r : day_records[di]) {
        const int g = tag[r->caller.value];
        if (g < 0) continue;
        samples[static_cast<std::size_t>(g)].push_back(
            stig::CellSample{antenna_cell[r->site], stig::step_of(r->ts, engine.step_seconds)});
      }
      for (const auto& [g, members] : sub)
        for (UserIndex u : members) tag[u.value] = -1;

      const auto local = stig::build_trail(samples[0], window, engine.policy, footprint, raster);
      const std::size_t k = sub.at(0).size();
      for (int g = 1; g <= n_groups; ++g) {
        MsCell cell;
        cell.day = day;
        cell.trial = t;
        cell.group = g;
        cell.seed = seed;
        cell.group_size = k;
        double il_sum = 0.0;
        for (UserIndex u : sub.at(g)) il_sum += pd.refugee_il.at(u);
        cell.group_il = il_sum / static_cast<double>(k);
        const auto trail =
            stig::build_trail(samples[static_cast<std::size_t>(g)], window, engine.policy, footprint, raster);
        try {
          cell.ms = stig::trail_similarity(trail, local);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::BothTrailsEmpty) throw;
          out.skipped.push_back(Skip{"ms_cell", date + "/" + std::to_string(t) + "/" + std::to_string(g),
                                     "BothTrailsEmpty"});
        }
        out.cells.push_back(cell);
      }
    }
  });

  DailyMs result;
  std::size_t used_days = 0;
  for (auto& d : days) {
    if (!d.cells.empty()) ++used_days;
    result.cells.insert(result.cells.end(), d.cells.begin(), d.cells.end());
    for (auto& s : d.skipped) prep.log.skipped.push_back(std::move(s));
  }
  std::size_t covered = 0;
  for (int p : prep.period_of_day) covered += p >= 0;
  prep.log.funnels["ms_days"] = {{"days_in_year", static_cast<std::size_t>(n_days)},
                                 {"in_periods", covered},
                                 {"with_all_groups", used_days}};
  prep.log.seeds["ms.subsample_rule"] = derive_seed(cfg.stats.seed, 3);
  return result;
}

MsIlResult run_ms_il(Prepared& prep, const DailyMs& daily) {
  const auto& cfg = prep.config;
  MsIlResult out;
  std::vector<double> rs;
  for (int t = 0; t < cfg.stats.n_trials; ++t) {
    std::vector<double> x, y;
    for (const auto& c : daily.cells) {
      if (c.trial != t || !std::isfinite(c.ms)) continue;
      x.push_back(cfg.stats.ms_x == MsX::GroupMeanIl
                      ? c.group_il
                      : (c.group - 0.5) / static_cast<double>(cfg.stats.n_groups));
      y.push_back(c.ms);
    }
    const auto seed = derive_seed(cfg.stats.seed, 4, static_cast<std::uint64_t>(t));
    prep.log.seeds["ms_il.trial_" + std::to_string(t)] = seed;
    if (const auto res = try_pearson(x, y, cfg.stats.n_perm, seed, prep.log, "ms_il_trial",
                                     std::to_string(t))) {
      out.rows.push_back(MsIlTrialRow{t, x.size(), res->r, res->p});
      rs.push_back(res->r);
    }
  }
  out.r = summarize(rs);
  return out;
}

// ---------------------------------------------------------------------------

EventImpactResult run_event_impact(Prepared& prep, const DailyMs& daily) {
  const Dataset& ds = *prep.data;
  const auto& cfg = prep.config;
  const int n_groups = cfg.stats.n_groups;
  const int n_days = ds.year.n_days();
  const auto G = static_cast<std::size_t>(n_groups + 1);

  for (const auto e : cfg.events) {
    const bool inside = ds.year.contains(e);
    const int idx = inside ? ds.year.day_index(e) : -1;
    bool ok = inside && idx - kEventWindowDays >= 0 && idx + kEventWindowDays < n_days;
    for (int d = idx - kEventWindowDays; ok && d <= idx + kEventWindowDays; ++d)
      ok = prep.period_of_day[static_cast<std::size_t>(d)] >= 0;
    if (!ok)
      throw Error(ErrorCode::EventTooCloseToYearEdge,
                  "event " + cdr::format_date(e) + " needs 14 covered days on each side");
  }

  // Daily MS per group averaged over trials.
  std::vector<std::vector<double>> ms_sum(static_cast<std::size_t>(n_days), std::vector<double>(G, 0.0));
  std::vector<std::vector<int>> ms_n(static_cast<std::size_t>(n_days), std::vector<int>(G, 0));
  for (const auto& c : daily.cells)
    if (std::isfinite(c.ms)) {
      ms_sum[static_cast<std::size_t>(c.day)][static_cast<std::size_t>(c.group)] += c.ms;
      ++ms_n[static_cast<std::size_t>(c.day)][static_cast<std::size_t>(c.group)];
    }
  const auto ms_day = [&](int d, int g) {
    const int n = ms_n[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)];
    return n ? ms_sum[static_cast<std::size_t>(d)][static_cast<std::size_t>(g)] / n : kNaN;
  };

  // Per-day refugee call counts toward locals, by the caller's period group.
  struct UserDay {
    UserIndex user;
    int group = 0;
    std::int64_t to_locals = 0;
    std::int64_t total = 0;
  };
  std::vector<std::vector<UserDay>> pct_days(static_cast<std::size_t>(n_days));
  for (const auto& pd : prep.periods)
    for (const auto& [u, il] : pd.refugee_il) {
      const int g = il_group(il, n_groups);
      std::map<int, UserDay> per_day;
      for (const auto& r : pd.by_user.at(u)) {
        auto& ud = per_day[ds.year.day_index(r.ts)];
        ud.user = u;
        ud.group = g;
        ++ud.total;
        if (r.callee_class == UserClass::Local) ++ud.to_locals;
      }
      for (const auto& [d, ud] : per_day) pct_days[static_cast<std::size_t>(d)].push_back(ud);
    }
  const auto pct_over = [&](int first, int last, int g) {
    std::map<UserIndex, std::pair<std::int64_t, std::int64_t>> per_user;
    std::int64_t loc = 0, tot = 0;
    for (int d = first; d <= last; ++d)
      for (const auto& ud : pct_days[static_cast<std::size_t>(d)])
        if (ud.group == g) {
          loc += ud.to_locals;
          tot += ud.total;
          auto& pu = per_user[ud.user];
          pu.first += ud.to_locals;
          pu.second += ud.total;
        }
    if (cfg.stats.pct_mode == PctMode::Pooled) return tot ? static_cast<double>(loc) / tot : kNaN;
    std::vector<double> v;
    for (const auto& [u, c] : per_user) v.push_back(static_cast<double>(c.first) / c.second);
    return mean_of(v);
  };
  const auto ms_over = [&](int first, int last, int g) {
    std::vector<double> v;
    for (int d = first; d <= last; ++d) v.push_back(ms_day(d, g));
    return mean_of(v);
  };

  // Normalizers: mean over periods of the per-period value.
  std::vector<double> norm_ms(G, kNaN), norm_pct(G, kNaN);
  for (int g = 1; g <= n_groups; ++g) {
    std::vector<double> pm, pp;
    for (const auto& pd : prep.periods) {
      const int first = ds.year.day_index(pd.period.start);
      const int last = std::min(first + pd.period.n_days, n_days) - 1;
      pm.push_back(ms_over(first, last, g));
      pp.push_back(pct_over(first, last, g));
    }
    norm_ms[static_cast<std::size_t>(g)] = mean_of(pm);
    norm_pct[static_cast<std::size_t>(g)] = mean_of(pp);
  }

  EventImpactResult out;
  std::map<std::pair<int, ImpactMeasure>, std::vector<double>> ratios;
  for (const auto e : cfg.events) {
    const int idx = ds.year.day_index(e);
    for (int g = 1; g <= n_groups; ++g)
      for (const auto measure : {ImpactMeasure::Ms, ImpactMeasure::PctCallsToLocals}) {
        const bool is_ms = measure == ImpactMeasure::Ms;
        const double norm = is_ms ? norm_ms[static_cast<std::size_t>(g)] : norm_pct[static_cast<std::size_t>(g)];
        const double before = is_ms ? ms_over(idx - kEventWindowDays, idx - 1, g)
                                    : pct_over(idx - kEventWindowDays, idx - 1, g);
        const double after = is_ms ? ms_over(idx + 1, idx + kEventWindowDays, g)
                                   : pct_over(idx + 1, idx + kEventWindowDays, g);
        EventImpactRow row;
        row.event = e;
        row.group = g;
        row.measure = measure;
        const std::string item = cdr::format_date(e) + "/" + std::to_string(g) + "/" + std::string(to_string(measure));
        if (!(norm > 0.0)) {
          prep.log.skip("event_impact", item, "ZeroBaseline");
        } else {
          row.before = before / norm;
          row.after = after / norm;
          if (const auto r = impact_ratio(row.before, row.after)) {
            row.ratio = *r;
            ratios[{g, measure}].push_back(*r);
          } else {
            prep.log.skip("event_impact", item, "ZeroAfter");
          }
        }
        out.rows.push_back(row);
      }
  }
  for (int g = 1; g <= n_groups; ++g)
    for (const auto measure : {ImpactMeasure::Ms, ImpactMeasure::PctCallsToLocals})
      out.summary.push_back(EventImpactSummaryRow{g, measure, summarize(ratios[{g, measure}])});
  return out;
}

}  // namespace cdrstig::pipeline
