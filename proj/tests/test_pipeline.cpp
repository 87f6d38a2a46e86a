#include <algorithm>
#include <cmath>
#include <filesystem>

#include "cdrstig/error.hpp"
#include "cdrstig/pipeline.hpp"
#include "cdrstig/text.hpp"
#include "doctest.h"
#include "json.hpp"
#include "test_util.hpp"

using namespace cdrstig;
using namespace cdrstig::pipeline;
using nlohmann::json;

namespace {

const synth::SynthData& small_city() {
  static const synth::SynthData d = [] {
    synth::SynthConfig c;
    c.seed = 11;
    c.population.n_refugees = 250;
    c.population.n_locals = 120;
    return synth::generate(c);
  }();
  return d;
}

RunConfig fast_config() {
  RunConfig c;
  c.stats.n_perm = 49;
  c.stats.n_trials = 1;
  c.stats.seed = 5;
  return c;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvariantViolation;
}

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    out[e.path().filename().string()] = text::read_file(e.path().string());
  return out;
}

}  // namespace

TEST_CASE("configuration parsing") {
  const auto c = parse_config(R"({
    "study_year": 2017,
    "period_scheme": "calendar_month",
    "stats": {"n_perm": 99, "seed": 7, "weight_matrix": "inverse_distance", "row_standardize": true},
    "engine": {"delta": 0.2, "evaporation": "subtractive"},
    "events": ["2017-07-15"],
    "strict": false
  })");
  CHECK(c.period_scheme == cdr::PeriodScheme::CalendarMonth);
  CHECK(c.stats.n_perm == 99);
  CHECK(c.stats.seed == 7);
  CHECK(c.stats.weights == stats::WeightConstruction::InverseDistance);
  CHECK(c.engine.policy.mode == stig::EvaporationMode::Subtractive);
  CHECK(c.strictness == cdr::Strictness::Lenient);
  REQUIRE(c.events.size() == 1);
  CHECK(cdr::format_date(c.events[0]) == "2017-07-15");

  // the echo is accepted back and is a fixed point
  const auto echo = config_to_json(c);
  CHECK(config_to_json(parse_config(echo)) == echo);

  CHECK(code_of([] { parse_config(R"({"n_perm": 5})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config(R"({"stats": {"bogus": 1}})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config(R"({"engine": {"delta": 1.5}})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config(R"({"period_scheme": "fortnight"})"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config("{not json"); }) == ErrorCode::ConfigInvalid);
  CHECK(code_of([] { parse_config(R"({"events": ["2017-02-30"]})"); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("config paths resolve against the config file") {
  testutil::TempDir dir;
  testutil::write_file(dir.file("run.json"), R"({"inputs": {"fgmd": "data/fgmd.csv"}})");
  const auto c = load_config(dir.file("run.json"));
  CHECK(std::filesystem::path(c.inputs.fgmd) == dir.path() / "data" / "fgmd.csv");
  CHECK(code_of([&] { check_inputs_exist(c); }) == ErrorCode::Io);
  CHECK(code_of([&] { load_config(dir.file("missing.json")); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("helpers") {
  CHECK(impact_ratio(1.0, 0.5) == 2.0);
  CHECK(impact_ratio(0.8, 0.8) == 1.0);
  CHECK_FALSE(impact_ratio(1.0, 0.0));

  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));

  CHECK(il_group(0.0, 5) == 1);
  CHECK(il_group(0.2, 5) == 2);
  CHECK(il_group(1.0, 5) == 5);
  CHECK(il_group(0.49, 2) == 1);
  CHECK(il_group(0.5, 2) == 2);
  CHECK(il_group(1.0, 3) == 3);

  const auto s = summarize(std::vector<double>{3, 1, 2});
  CHECK(s.n == 3);
  CHECK(s.median == 2.0);
  CHECK(std::isnan(summarize({}).median));
}

TEST_CASE("preparation funnels are monotone") {
  auto prep = prepare(fast_config(), small_city().dataset);
  CHECK(prep.periods.size() == 26);
  REQUIRE_FALSE(prep.log.funnels.empty());
  for (const auto& [name, stages] : prep.log.funnels)
    for (std::size_t i = 1; i < stages.size(); ++i) CHECK(stages[i].count <= stages[i - 1].count);
  for (const auto& pd : prep.periods)
    for (const auto& [u, il] : pd.refugee_il) {
      CHECK(pd.active.count(u));
      CHECK(il >= 0.0);
      CHECK(il <= 1.0);
    }
}

TEST_CASE("periods with fewer than three refugees are skipped by name") {
  synth::SynthConfig c;
  c.seed = 3;
  c.population.n_refugees = 2;
  c.population.n_locals = 30;
  const auto d = synth::generate(c);
  auto prep = prepare(fast_config(), d.dataset);
  const auto res = run_cr_il(prep);
  CHECK(res.rows.empty());
  CHECK(res.r.n == 0);
  std::size_t named = 0;
  for (const auto& s : prep.log.skipped)
    if (s.scope == "cr_il_period") {
      CHECK(s.reason == "TooFewSamples");
      CHECK_FALSE(s.item.empty());
      ++named;
    }
  CHECK(named == res.n_periods_total);
}

TEST_CASE("daily MS agrees with the reference similarity") {
  const auto& ds = small_city().dataset;
  auto cfg = fast_config();
  cfg.stats.n_trials = 2;
  auto prep = prepare(cfg, ds);
  const auto daily = compute_daily_ms(prep);
  REQUIRE_FALSE(daily.cells.empty());

  const metrics::TrailContext ctx{&ds.registry, cfg.engine, metrics::mobility_raster(ds.registry, cfg.engine)};
  std::size_t checked = 0;
  for (std::size_t i = 0; i < daily.cells.size() && checked < 40; i += 37) {
    const auto& cell = daily.cells[i];
    const auto day_ts = ds.year.day(cell.day);
    const auto& pd = prep.periods[static_cast<std::size_t>(prep.period_of_day[static_cast<std::size_t>(cell.day)])];
    std::map<int, cdr::UserSet> groups;
    for (const auto& [u, il] : pd.refugee_il) groups[il_group(il, 5)].insert(u);
    for (const auto& [u, recs] : pd.by_user)
      if (recs.front().caller_class == cdr::UserClass::Local) groups[0].insert(u);
    const auto sub = metrics::subsample_equal_groups(groups, derive_seed(cfg.stats.seed, 3, cell.day, cell.trial));
    CHECK(cell.seed == derive_seed(cfg.stats.seed, 3, cell.day, cell.trial));
    CHECK(cell.group_size == sub.at(0).size());
    std::vector<cdr::CallRecord> day;
    for (const auto& [u, recs] : pd.by_user)
      for (const auto& r : recs)
        if (r.ts >= day_ts && r.ts < day_ts + cdr::kSecondsPerDay) day.push_back(r);
    std::sort(day.begin(), day.end(), [](const auto& x, const auto& y) { return x.ts < y.ts; });
    if (std::isfinite(cell.ms)) {
      const double ref = metrics::mobility_similarity(sub.at(cell.group), sub.at(0), day, day_ts, ctx);
      CHECK(std::abs(ref - cell.ms) <= 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 10);

  auto again = prepare(cfg, ds);
  again.config.workers = 3;
  const auto parallel = compute_daily_ms(again);
  REQUIRE(parallel.cells.size() == daily.cells.size());
  for (std::size_t i = 0; i < daily.cells.size(); ++i)
    CHECK((parallel.cells[i].ms == daily.cells[i].ms || (std::isnan(parallel.cells[i].ms) && std::isnan(daily.cells[i].ms))));
}

TEST_CASE("district analysis and the zero-weight lag model") {
  auto prep = prepare(fast_config(), small_city().dataset);
  const auto res = run_district_analysis(prep);
  CHECK_FALSE(res.districts.empty());
  for (const auto& m : res.months) {
    if (std::isfinite(m.ri)) CHECK((m.ri >= 0.0 && m.ri <= 1.0));
    if (std::isfinite(m.da)) CHECK((m.da >= 0.0 && m.da <= 1.0));
    if (std::isfinite(m.mean_cr)) CHECK((m.mean_cr >= 0.0 && m.mean_cr <= 1.0));
  }
  std::size_t hist = 0;
  for (auto h : res.ri_histogram) hist += h;
  CHECK(hist <= res.months.size());
  REQUIRE(res.table2);

  // rebuild the design used for the lag model and refit it with W = 0
  std::vector<double> y, rent, da, ri;
  for (const auto& id : res.table2->districts) {
    const auto it = std::find_if(res.districts.begin(), res.districts.end(),
                                 [&](const DistrictRow& r) { return r.district == id; });
    REQUIRE(it != res.districts.end());
    y.push_back(it->mean_cr);
    rent.push_back(it->rent);
    da.push_back(it->mean_da);
    ri.push_back(it->mean_ri);
  }
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd x(n, 3);
  const std::array<const std::vector<double>*, 3> cols{&rent, &da, &ri};
  for (Eigen::Index j = 0; j < 3; ++j) {
    const auto v = stats::min_max_normalize(*cols[static_cast<std::size_t>(j)]).values;
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = v[static_cast<std::size_t>(i)];
  }
  stats::WeightMatrix zero;
  zero.w = Eigen::MatrixXd::Zero(n, n);
  const auto lag = stats::spatial_lag_regress(y, x, zero, {0.999, 1e-6, 9, 1});
  const auto b = stats::ols(y, x);
  for (Eigen::Index j = 0; j < b.size(); ++j) CHECK(std::abs(lag.beta(j) - b(j)) <= 1e-6);
}

TEST_CASE("event too close to the year edge") {
  auto cfg = fast_config();
  cfg.events = {*cdr::parse_date("2017-01-05")};
  auto prep = prepare(cfg, small_city().dataset);
  const auto daily = compute_daily_ms(prep);
  CHECK(code_of([&] { run_event_impact(prep, daily); }) == ErrorCode::EventTooCloseToYearEdge);
  prep.config.events = {*cdr::parse_date("2017-12-20")};
  CHECK(code_of([&] { run_event_impact(prep, daily); }) == ErrorCode::EventTooCloseToYearEdge);
}

TEST_CASE("end to end tables, manifest and determinism") {
  auto cfg = fast_config();
  cfg.events = {*cdr::parse_date("2017-06-01")};
  const auto run = [&](const std::string& dir) {
    auto prep = prepare(cfg, small_city().dataset);
    Results r;
    r.cr_il = run_cr_il(prep);
    r.district = run_district_analysis(prep);
    r.daily_ms = compute_daily_ms(prep);
    r.ms_il = run_ms_il(prep, *r.daily_ms);
    r.event_impact = run_event_impact(prep, *r.daily_ms);
    const auto files = write_tables(r, prep, dir);
    write_manifest(prep.config, prep.log, nullptr, files, dir, "report-all");
    return std::pair{r, prep.log};
  };
  testutil::TempDir a, b;
  const auto [res, log] = run(a.path().string());
  run(b.path().string());
  const auto fa = read_dir(a.path()), fb = read_dir(b.path());
  CHECK(fa == fb);
  CHECK(fa.count("cr_il_periods.csv"));
  CHECK(fa.count("event_impact.csv"));

  REQUIRE(res.event_impact);
  CHECK(res.event_impact->rows.size() == 10);
  for (const auto& row : res.event_impact->rows)
    if (std::isfinite(row.ratio)) CHECK(row.ratio == doctest::Approx(row.before / row.after));

  const auto m = json::parse(fa.at("manifest.json"));
  CHECK(m["command"] == "report-all");
  CHECK(m["seeds"].contains("stats.seed"));
  CHECK(m["seeds"].contains("ms.subsample_rule"));
  for (const auto& row : res.cr_il->rows) CHECK(m["seeds"].contains("cr_il.period_" + std::to_string(row.period)));
  CHECK(m["seeds"].contains("ms_il.trial_0"));
  for (const auto& s : m["skipped"]) CHECK_FALSE(s["reason"].get<std::string>().empty());
  for (const auto& [name, stages] : m["funnels"].items())
    for (std::size_t i = 1; i < stages.size(); ++i) CHECK(stages[i]["count"] <= stages[i - 1]["count"]);
  CHECK(parse_config(m["config"].dump()).stats.seed == cfg.stats.seed);
}

TEST_CASE("empty results still produce headers") {
  Dataset empty;
  empty.year = cdr::StudyYear(2017);
  auto prep = prepare(fast_config(), empty);
  Results r;
  r.cr_il = run_cr_il(prep);
  r.daily_ms = compute_daily_ms(prep);
  r.ms_il = run_ms_il(prep, *r.daily_ms);
  testutil::TempDir dir;
  const auto files = write_tables(r, prep, dir.path().string());
  write_manifest(prep.config, prep.log, nullptr, files, dir.path().string(), "ms-il");
  CHECK(text::read_file(dir.file("cr_il_periods.csv")) == "period,start,n_refugees,r,p\n");
  CHECK(text::read_file(dir.file("ms_il_trials.csv")) == "trial,n,r,p\n");
  CHECK(std::filesystem::exists(dir.file("manifest.json")));
}
