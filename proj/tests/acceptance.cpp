// Acceptance run: one PASS/FAIL line per criterion.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cdrstig/error.hpp"
#include "cdrstig/metrics.hpp"
#include "cdrstig/pipeline.hpp"
#include "cdrstig/stats.hpp"
#include "cdrstig/stigmergy.hpp"
#include "cdrstig/synth.hpp"
#include "cdrstig/text.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace cdrstig;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using cdr::CallRecord;
using cdr::DistrictIndex;
using cdr::UserIndex;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Collects failed sub-checks and a few measured values for the report line.
struct Outcome {
  std::vector<std::string> failures;
  std::ostringstream info;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  bool ok() const { return failures.empty(); }
};

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return stats::quantile(v, 0.5);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& stem) {
    std::random_device rd;
    path = fs::temp_directory_path() / (stem + "_" + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

// ---------------------------------------------------------------------------
// 1. build_trail against the per-cell simulator

void criterion1(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const int rows = 1 + static_cast<int>(rng() % 50), cols = 1 + static_cast<int>(rng() % 50);
    const geo::GridSpec spec{{41.0, 29.0}, 40.0 + static_cast<double>(rng() % 200), rows, cols};
    const double top = 50.0 + static_cast<double>(rng() % 200);
    const stig::MarkSpec mark{top + 10.0 + static_cast<double>(rng() % 400), top, 0.5 + static_cast<double>(rng() % 4)};
    const bool mul = rng() % 2 == 0;
    const stig::EvaporationPolicy pol{static_cast<double>(rng() % 101) / 100.0,
                                      mul ? stig::EvaporationMode::Multiplicative : stig::EvaporationMode::Subtractive};
    const std::int64_t first = 1000, last = first + static_cast<std::int64_t>(rng() % 10);
    std::vector<stig::SampleEvent> ev;
    std::vector<oracle::Sample> os;
    const int n = static_cast<int>(rng() % 21);
    for (int i = 0; i < n; ++i) {
      const geo::Cell c{static_cast<std::int32_t>(rng() % rows), static_cast<std::int32_t>(rng() % cols)};
      const std::int64_t s = first + static_cast<std::int64_t>(rng() % (last - first + 1));
      ev.push_back({geo::cell_center(c, spec), s});
      os.push_back({c.row, c.col, s});
    }
    const auto got = stig::build_trail(ev, {first, last}, pol, mark, spec);
    const auto want = oracle::trail(os, first, last, pol.delta, mul, mark.base_radius_m, mark.top_radius_m,
                                    mark.peak, spec.cell_size_m, rows, cols);
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got.values()[i] - want[i]));
  }
  const double t = seconds_since(t0);
  o.info << "200 cases, max cell error " << worst << ", " << t << " s";
  o.require(worst <= 1e-12, "cell error above 1e-12");
  o.require(t < 10.0, "runtime over 10 s");
}

// ---------------------------------------------------------------------------
// 2. trail similarity invariants

void criterion2(Outcome& o) {
  const geo::GridSpec spec{{41.0, 29.0}, 100.0, 40, 40};
  const stig::MarkSpec mark;
  std::mt19937_64 rng(202);
  const auto random_trail = [&](int n, const stig::EvaporationPolicy& pol) {
    std::vector<stig::SampleEvent> ev;
    for (int i = 0; i < n; ++i)
      ev.push_back({geo::cell_center({static_cast<std::int32_t>(rng() % 40), static_cast<std::int32_t>(rng() % 40)}, spec),
                    static_cast<std::int64_t>(rng() % 24)});
    return stig::build_trail(ev, {0, 23}, pol, mark, spec);
  };
  double worst_scale = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto a = random_trail(1 + static_cast<int>(rng() % 15), {});
    const auto b = random_trail(1 + static_cast<int>(rng() % 15), {});
    const double s = stig::trail_similarity(a, b);
    o.require(s >= 0.0 && s <= 1.0, "similarity outside [0, 1]");
    o.require(s == stig::trail_similarity(b, a), "similarity not symmetric");
    o.require(stig::trail_similarity(a, a) == 1.0, "sim(a, a) != 1");
    for (double f : {0.25, 0.5, 2.0, 4.0}) {
      stig::Trail fa = a;
      fa.scale(f);
      worst_scale = std::max(worst_scale, std::abs(stig::trail_similarity(fa, a) - std::min(f, 1.0) / std::max(f, 1.0)));
    }
  }
  o.require(worst_scale <= 1e-12, "scaling identity off by more than 1e-12");

  // disjoint supports
  const auto at = [&](geo::Cell c) {
    const std::vector<stig::SampleEvent> ev{{geo::cell_center(c, spec), 0}};
    return stig::build_trail(ev, {0, 0}, {}, mark, spec);
  };
  o.require(stig::trail_similarity(at({3, 3}), at({35, 35})) == 0.0, "disjoint trails not 0");

  // evaporation over 100 empty steps
  for (auto mode : {stig::EvaporationMode::Multiplicative, stig::EvaporationMode::Subtractive}) {
    const stig::EvaporationPolicy pol{0.1, mode};
    stig::Trail t = random_trail(10, pol);
    double prev = stig::trail_volume(t);
    for (int i = 0; i < 100; ++i) {
      t = stig::step(std::move(t), {}, pol, mark);
      const double v = stig::trail_volume(t);
      o.require(v <= prev, "volume increased on an empty step");
      prev = v;
    }
  }

  // zero evaporation: order does not matter
  std::vector<stig::SampleEvent> ev;
  for (int i = 0; i < 40; ++i)
    ev.push_back({geo::cell_center({static_cast<std::int32_t>(rng() % 40), static_cast<std::int32_t>(rng() % 40)}, spec),
                  static_cast<std::int64_t>(rng() % 24)});
  const stig::EvaporationPolicy none{0.0, stig::EvaporationMode::Multiplicative};
  const auto base = stig::build_trail(ev, {0, 23}, none, mark, spec);
  double worst_order = 0.0;
  for (int k = 0; k < 10; ++k) {
    std::shuffle(ev.begin(), ev.end(), rng);
    for (auto& e : ev) e.step = static_cast<std::int64_t>(rng() % 24);
    const auto again = stig::build_trail(ev, {0, 23}, none, mark, spec);
    for (std::size_t i = 0; i < base.values().size(); ++i)
      worst_order = std::max(worst_order, std::abs(again.values()[i] - base.values()[i]));
  }
  o.require(worst_order <= 1e-12, "delta = 0 result depends on sample order or step");
  o.info << "scaling error " << worst_scale << ", order error " << worst_order;
}

// ---------------------------------------------------------------------------
// 3. metric bounds and hand cases

CallRecord call(cdr::Timestamp ts, std::uint32_t user, cdr::UserClass callee, std::uint32_t site = 0) {
  CallRecord r;
  r.ts = ts;
  r.caller = UserIndex{user};
  r.caller_class = cdr::UserClass::Refugee;
  r.callee_class = callee;
  r.site = site;
  return r;
}

void criterion3(Outcome& o) {
  using cdr::UserClass;
  const cdr::Timestamp day = *cdr::parse_date("2017-03-06");
  std::mt19937_64 rng(303);

  cdr::Registry reg;
  for (int i = 0; i < 25; ++i)
    reg.add_antenna("A" + std::to_string(i), {41.0 + (i / 5) * 0.0036, 29.0 + (i % 5) * 0.00477}, "D1");
  metrics::TrailContext ctx{&reg, {}, {}};
  ctx.raster = metrics::mobility_raster(reg, ctx.engine);

  std::size_t n_il = 0, n_cr = 0, n_ms = 0, n_ri = 0, n_da = 0;
  double worst_scale = 0.0;
  for (int k = 0; k < 1000; ++k) {
    // IL and CR from one random user-period
    std::vector<CallRecord> r;
    const int n = 1 + static_cast<int>(rng() % 80);
    for (int i = 0; i < n; ++i)
      r.push_back(call(day + static_cast<cdr::Timestamp>(rng() % (14 * 86400)), 1, static_cast<UserClass>(rng() % 3)));
    if (std::any_of(r.begin(), r.end(), [](const CallRecord& c) { return c.callee_class != UserClass::Unknown; })) {
      const double il = metrics::interaction_level(r);
      o.require(il >= 0.0 && il <= 1.0, "IL outside [0, 1]");
      ++n_il;
    }
    metrics::CallingPattern lcp;
    for (int h = 0; h < 24; ++h) {
      lcp.values[h] = static_cast<double>(rng() % 7);
      lcp.observed[h] = true;
    }
    lcp.values[rng() % 24] += 1.0;
    const auto pat = metrics::calling_pattern(r);
    const double cr = metrics::calling_regularity(pat, lcp);
    o.require(cr >= 0.0 && cr <= 1.0 + 1e-15, "CR outside [0, 1]");
    auto scaled = pat;
    const double f = 0.01 + static_cast<double>(rng() % 1000) / 7.0;
    for (double& v : scaled.values) v *= f;
    worst_scale = std::max(worst_scale, std::abs(metrics::calling_regularity(scaled, lcp) - cr));
    ++n_cr;

    // MS between two equal random groups
    const std::uint32_t g = 1 + static_cast<std::uint32_t>(rng() % 4);
    cdr::UserSet ga, gb;
    std::vector<CallRecord> dayr;
    for (std::uint32_t u = 0; u < 2 * g; ++u) {
      (u < g ? ga : gb).insert(UserIndex{u});
      const int calls = static_cast<int>(rng() % 6);
      for (int i = 0; i < calls; ++i)
        dayr.push_back(call(day + static_cast<cdr::Timestamp>(rng() % 86400), u, UserClass::Local,
                            static_cast<std::uint32_t>(rng() % 25)));
    }
    std::sort(dayr.begin(), dayr.end(), [](const CallRecord& a, const CallRecord& b) { return a.ts < b.ts; });
    try {
      const double ms = metrics::mobility_similarity(ga, gb, dayr, day, ctx);
      o.require(ms >= 0.0 && ms <= 1.0, "MS outside [0, 1]");
      ++n_ms;
    } catch (const Error& e) {
      o.require(e.code() == ErrorCode::BothTrailsEmpty, std::string("unexpected MS error ") + e.what());
    }

    // RI from random night counts
    const auto total = static_cast<std::int64_t>(1 + rng() % 1000);
    const double ri = metrics::residential_inclusion(
        metrics::NightCounts{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(total + 1)), total});
    o.require(ri >= 0.0 && ri <= 1.0, "RI outside [0, 1]");
    ++n_ri;

    // DA from random residences
    std::vector<metrics::Residence> res;
    for (std::uint32_t u = 0; u < 20; ++u)
      for (int m = 1; m <= 12; ++m)
        if (rng() % 4) res.push_back({UserIndex{u}, m, DistrictIndex{static_cast<std::uint32_t>(rng() % 3)}});
    try {
      const double da = metrics::district_attractiveness(res, DistrictIndex{static_cast<std::uint32_t>(rng() % 3)},
                                                         1 + static_cast<int>(rng() % 11));
      o.require(da >= 0.0 && da <= 1.0, "DA outside [0, 1]");
      ++n_da;
    } catch (const Error& e) {
      o.require(e.code() == ErrorCode::NoResidents, std::string("unexpected DA error ") + e.what());
    }
  }
  o.require(worst_scale <= 1e-12, "CR not scale invariant");
  o.require(n_ms > 900 && n_da > 900, "too few valid MS/DA draws");

  // hand cases
  const std::vector<CallRecord> il_case{call(0, 1, UserClass::Local), call(1, 1, UserClass::Local),
                                        call(2, 1, UserClass::Local), call(3, 1, UserClass::Refugee)};
  o.require(metrics::interaction_level(il_case) == 0.75, "IL hand case != 0.75");
  o.require(metrics::residential_inclusion(metrics::NightCounts{20, 100}) == 0.2, "RI hand case != 0.2");
  const DistrictIndex d{0}, e{1};
  const std::vector<metrics::Residence> da_case{{UserIndex{1}, 3, d}, {UserIndex{2}, 3, d}, {UserIndex{3}, 3, d},
                                                {UserIndex{1}, 4, d}, {UserIndex{2}, 4, d}, {UserIndex{3}, 4, e}};
  o.require(metrics::district_attractiveness(da_case, d, 3) == 2.0 / 3.0, "DA hand case != 2/3");
  o.info << "IL " << n_il << ", CR " << n_cr << ", MS " << n_ms << ", RI " << n_ri << ", DA " << n_da
         << " draws; CR scale error " << worst_scale;
}

// ---------------------------------------------------------------------------
// 4. DTW against path enumeration

void criterion4(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(404);
  int mismatches = 0;
  for (int k = 0; k < 500; ++k) {
    std::vector<double> a(1 + rng() % 5), b(1 + rng() % 5);
    for (auto& v : a) v = static_cast<double>(static_cast<int>(rng() % 21) - 10);
    for (auto& v : b) v = static_cast<double>(static_cast<int>(rng() % 21) - 10);
    mismatches += stats::dtw(a, b) != oracle::dtw_paths(a, b);
  }
  const double t = seconds_since(t0);
  o.info << "500 pairs, " << mismatches << " mismatches, " << t << " s";
  o.require(mismatches == 0, "DTW differs from enumeration");
  o.require(t < 5.0, "runtime over 5 s");
}

// ---------------------------------------------------------------------------
// 5. Pearson and Moran

void criterion5(Outcome& o) {
  const double r = stats::pearson_r(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2});
  o.require(std::abs(r - 0.5) <= 1e-12, "r([1,2,3],[1,3,2]) != 0.5");

  stats::WeightMatrix ring;
  ring.w = Eigen::MatrixXd::Zero(4, 4);
  for (int i = 0; i < 4; ++i) ring.w(i, (i + 1) % 4) = ring.w(i, (i + 3) % 4) = 1.0;
  ring = stats::row_standardized(ring);
  const double ring_i = stats::morans_statistic(std::vector<double>{1, -1, 1, -1}, ring);
  o.require(std::abs(ring_i + 1.0) <= 1e-12, "ring-of-4 Moran's I != -1");

  // permutation distribution of I on a random planar weight matrix
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u01;
  const int n = 30;
  std::vector<geo::GeoPoint> pts;
  for (int i = 0; i < n; ++i) pts.push_back({41.0 + 0.3 * u01(rng), 29.0 + 0.3 * u01(rng)});
  const auto w = stats::build_weight_matrix(geo::district_distance_matrix(pts, true),
                                            stats::WeightConstruction::InverseDistance, true);
  std::vector<double> v(n);
  for (auto& x : v) x = u01(rng);
  const std::size_t n_perm = 10'000;
  long double sum = 0, sum2 = 0;
  for (std::size_t k = 0; k < n_perm; ++k) {
    std::shuffle(v.begin(), v.end(), rng);
    const double i = stats::morans_statistic(v, w);
    sum += i;
    sum2 += static_cast<long double>(i) * i;
  }
  const double mean = static_cast<double>(sum / n_perm);
  const double sd = std::sqrt(static_cast<double>((sum2 - sum * sum / n_perm) / (n_perm - 1)));
  const double se = sd / std::sqrt(static_cast<double>(n_perm));
  const double expected = -1.0 / (n - 1);
  o.require(std::abs(mean - expected) <= 3 * se, "permutation mean of I outside 3 SE of -1/(n-1)");
  o.info << "r " << r << ", ring I " << ring_i << ", perm mean " << mean << " vs " << expected << " (SE " << se << ")";
}

// ---------------------------------------------------------------------------
// 6. spatial lag recovery

void criterion6(Outcome& o) {
  const auto t0 = Clock::now();
  const Eigen::Vector4d beta_true(0.5, 1.0, -0.7, 0.3);
  for (auto cons : {stats::WeightConstruction::InverseDistance, stats::WeightConstruction::MinMaxDistance}) {
    const char* cname = cons == stats::WeightConstruction::InverseDistance ? "inverse" : "minmax";
    for (double rho : {0.0, 0.3, 0.5}) {
      std::vector<double> rho_hat;
      std::vector<std::vector<double>> beta_hat(4);
      for (std::uint64_t s = 1; s <= 20; ++s) {
        std::mt19937_64 rng(600 + s);
        std::uniform_real_distribution<double> u01;
        std::normal_distribution<double> noise(0.0, 0.01);
        const int n = 38;
        std::vector<geo::GeoPoint> pts;
        for (int i = 0; i < n; ++i) pts.push_back({41.0 + 0.3 * u01(rng), 29.0 + 0.4 * u01(rng)});
        const auto w = stats::build_weight_matrix(geo::district_distance_matrix(pts, true), cons, true);
        Eigen::MatrixXd x(n, 3);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < 3; ++j) x(i, j) = u01(rng);
        Eigen::MatrixXd z(n, 4);
        z.col(0).setOnes();
        z.rightCols(3) = x;
        Eigen::VectorXd e(n);
        for (int i = 0; i < n; ++i) e(i) = noise(rng);
        const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - rho * w.w;
        const Eigen::VectorXd y = a.lu().solve(z * beta_true + e);
        const std::vector<double> yv(y.data(), y.data() + n);
        const auto m = stats::spatial_lag_regress(yv, x, w, {0.999, 1e-8, 99, s});
        rho_hat.push_back(m.rho);
        for (int j = 0; j < 4; ++j) beta_hat[static_cast<std::size_t>(j)].push_back(m.beta(j));
      }
      const double rm = median(rho_hat);
      o.info << cname << " rho " << rho << "->" << rm << "; ";
      o.require(std::abs(rm - rho) <= 0.1, std::string(cname) + ": rho off by more than 0.1");
      for (int j = 0; j < 4; ++j)
        o.require(std::abs(median(beta_hat[static_cast<std::size_t>(j)]) - beta_true(j)) <= 0.05,
                  std::string(cname) + ": beta off by more than 0.05");
    }
  }

  // W = 0 is OLS
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u01;
  const int n = 38;
  Eigen::MatrixXd x(n, 3);
  std::vector<double> y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = u01(rng);
    y[static_cast<std::size_t>(i)] = 0.5 + x(i, 0) - 0.7 * x(i, 1) + 0.3 * x(i, 2) + 0.01 * (u01(rng) - 0.5);
  }
  stats::WeightMatrix zero;
  zero.w = Eigen::MatrixXd::Zero(n, n);
  const auto m = stats::spatial_lag_regress(y, x, zero, {0.999, 1e-8, 99, 1});
  const auto b = stats::ols(y, x);
  o.require((m.beta - b).cwiseAbs().maxCoeff() <= 1e-6, "W = 0 fit differs from OLS");
  const double t = seconds_since(t0);
  o.info << "W=0 max |beta - ols| " << (m.beta - b).cwiseAbs().maxCoeff() << ", " << t << " s";
  o.require(t < 30.0, "runtime over 30 s");
}

// ---------------------------------------------------------------------------
// 7. directional end-to-end reproduction

struct SeedRun {
  double cr_il = std::numeric_limits<double>::quiet_NaN();
  double ms_il = std::numeric_limits<double>::quiet_NaN();
  std::map<std::string, double> district;
  std::map<std::pair<std::string, int>, double> ratio;  // (event date, bin) -> MS ratio
};

SeedRun run_plant(const synth::SynthConfig& sc, const std::vector<std::string>& events, bool full) {
  const auto d = synth::generate(sc);
  pipeline::RunConfig rc;
  rc.stats.n_perm = 99;
  rc.stats.seed = sc.seed;
  for (const auto& e : events) rc.events.push_back(*cdr::parse_date(e));
  auto prep = pipeline::prepare(rc, d.dataset);
  SeedRun out;
  out.cr_il = pipeline::run_cr_il(prep).r.median;
  const auto daily = pipeline::compute_daily_ms(prep);
  out.ms_il = pipeline::run_ms_il(prep, daily).r.median;
  if (!full) return out;
  for (const auto& c : pipeline::run_district_analysis(prep).correlations) out.district[c.name] = c.r;
  for (const auto& row : pipeline::run_event_impact(prep, daily).rows)
    if (row.measure == pipeline::ImpactMeasure::Ms) out.ratio[{cdr::format_date(row.event), row.group}] = row.ratio;
  return out;
}

void criterion7(Outcome& o, int n_seeds) {
  const auto t0 = Clock::now();
  const std::string null_day = "2017-04-01", event_day = "2017-07-01";
  std::vector<SeedRun> planted, flat, shared;
  for (int s = 1; s <= n_seeds; ++s) {
    synth::SynthConfig a;
    a.seed = static_cast<std::uint64_t>(s);
    a.events.push_back({*cdr::parse_date(event_day), 0.5, 1.0});
    planted.push_back(run_plant(a, {null_day, event_day}, true));

    synth::SynthConfig b;
    b.seed = static_cast<std::uint64_t>(1000 + s);
    b.population.kappa_routine = 0.0;
    b.population.kappa_mobility = 0.0;
    b.population.kappa_cost = 0.0;
    flat.push_back(run_plant(b, {}, false));

    synth::SynthConfig c;
    c.seed = static_cast<std::uint64_t>(2000 + s);
    c.population.shared_refugee_trace = true;
    shared.push_back(run_plant(c, {}, false));
  }
  const auto med = [](const std::vector<SeedRun>& runs, auto get) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(get(r));
    return median(v);
  };

  // (a)
  const double cr_hi = med(planted, [](const SeedRun& r) { return r.cr_il; });
  const double cr_null = med(flat, [](const SeedRun& r) { return r.cr_il; });
  o.require(cr_hi > 0.5, "(a) CR-IL median r <= 0.5 at kappa_routine 0.9");
  o.require(std::abs(cr_null) < 0.2, "(a) CR-IL median |r| >= 0.2 at kappa_routine 0");
  o.info << "(a) " << cr_hi << " / " << cr_null;

  // (b)
  std::map<std::string, double> dist;
  for (const char* name : {"cr_cost", "da_cost", "euclidean_cost", "cosine_cost", "dtw_cost"}) {
    dist[name] = med(planted, [&](const SeedRun& r) {
      const auto it = r.district.find(name);
      return it == r.district.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
    });
  }
  o.require(dist["cr_cost"] > 0, "(b) CR-cost r <= 0");
  o.require(dist["da_cost"] < 0, "(b) DA-cost r >= 0");
  for (const char* name : {"euclidean_cost", "cosine_cost", "dtw_cost"})
    o.require(dist[name] < 0, std::string("(b) ") + name + " r >= 0");
  o.info << "; (b) cr " << dist["cr_cost"] << " da " << dist["da_cost"] << " euc " << dist["euclidean_cost"]
         << " cos " << dist["cosine_cost"] << " dtw " << dist["dtw_cost"];

  // (c)
  const double ms_hi = med(planted, [](const SeedRun& r) { return r.ms_il; });
  const double ms_null = med(shared, [](const SeedRun& r) { return r.ms_il; });
  o.require(ms_hi > 0.6, "(c) MS-IL median r <= 0.6 at kappa_mobility 0.9");
  o.require(std::abs(ms_null) < 0.2, "(c) MS-IL median |r| >= 0.2 with identical refugee traces");
  o.info << "; (c) " << ms_hi << " / " << ms_null;

  // (d)
  std::map<int, double> bin_ratio;
  o.info << "; (d)";
  for (int g = 1; g <= 5; ++g) {
    bin_ratio[g] = med(planted, [&](const SeedRun& r) { return r.ratio.at({event_day, g}); });
    const double null_dev = med(planted, [&](const SeedRun& r) { return std::abs(r.ratio.at({null_day, g}) - 1.0); });
    o.require(bin_ratio[g] > 1.0, "(d) median MS ratio <= 1 in bin " + std::to_string(g));
    o.require(null_dev < 0.15, "(d) null event median |ratio - 1| >= 0.15 in bin " + std::to_string(g));
    o.info << " b" << g << " " << bin_ratio[g] << "/" << null_dev;
  }
  o.require(bin_ratio[1] > bin_ratio[5], "(d) bin-1 ratio <= bin-5 ratio");

  const double t = seconds_since(t0);
  o.info << "; " << n_seeds << " seeds x 3 plants, " << t << " s";
  o.require(t < 600.0, "runtime over 10 min");
}

// ---------------------------------------------------------------------------
// 8. throughput

double time_ingest_and_trails(const InputPaths& paths, unsigned workers, std::size_t& n_records) {
  const auto t0 = Clock::now();
  const Dataset ds = load_dataset(paths, 2017, cdr::Strictness::Strict, nullptr, workers);
  n_records = ds.fgmd.size();
  pipeline::RunConfig rc;
  rc.workers = workers;
  rc.stats.n_trials = 1;
  rc.stats.n_groups = 5;
  auto prep = pipeline::prepare(rc, ds);
  const auto daily = pipeline::compute_daily_ms(prep);
  if (daily.cells.empty()) throw Error(ErrorCode::InvariantViolation, "no trails were built");
  return seconds_since(t0);
}

void criterion8(Outcome& o) {
  TempDir dir("cdrstig_throughput");
  {
    synth::SynthConfig sc;
    sc.seed = 8;
    sc.population.n_locals = 3'900;
    sc.population.n_refugees = 3'900;
    synth::write_synth(synth::generate(sc), dir.path.string());
  }
  auto paths = synth::synth_paths(dir.path.string());
  paths.cgmd.clear();
  paths.atd.clear();
  std::size_t n = 0;
  const double t1 = time_ingest_and_trails(paths, 1, n);
  const double t4 = time_ingest_and_trails(paths, 4, n);
  const unsigned hw = std::thread::hardware_concurrency();
  o.info << n << " FGMD records; 1 worker " << t1 << " s, 4 workers " << t4 << " s (" << hw
         << " hardware threads)";
  o.require(n >= 10'000'000, "fewer than 10M records");
  o.require(t1 < 300.0, "single-threaded run over 5 min");
  o.require(t4 < 120.0, "4-worker run over 2 min");
}

// ---------------------------------------------------------------------------
// 9. determinism through the CLI

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  out << body;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
}

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "'" + cli + "' " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

void criterion9(Outcome& o, const std::string& cli) {
  if (cli.empty()) {
    o.require(false, "no --cli given");
    return;
  }
  TempDir dir("cdrstig_determinism");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  write_text((dir.path / "synth.json").string(),
                   R"({"synth": {"seed": 9, "population": {"n_refugees": 400, "n_locals": 400},
                       "events": [{"date": "2017-07-01", "severity": 0.5, "low_il_multiplier": 1.0}]}})");
  o.require(run_cli(cli, "synth --config " + q(dir.path / "synth.json") + " --out " + q(dir.path / "data")) == 0,
            "synth failed");
  write_text((dir.path / "run.json").string(), R"({
    "inputs": {"fgmd": "data/fgmd.csv", "cgmd": "data/cgmd.csv", "atd": "data/atd.csv",
               "antennas": "data/antennas.csv", "districts": "data/districts.csv"},
    "events": ["2017-07-01"],
    "stats": {"n_perm": 199, "n_trials": 2, "seed": 42}
  })");
  for (const char* out : {"a", "b"})
    o.require(run_cli(cli, "report-all --config " + q(dir.path / "run.json") + " --out " + q(dir.path / out)) == 0,
              std::string("report-all run ") + out + " failed");
  if (!o.ok()) return;
  const auto manifest = nlohmann::json::parse(text::read_file((dir.path / "a" / "manifest.json").string()));
  write_text((dir.path / "replay.json").string(), manifest["config"].dump(2));
  o.require(run_cli(cli, "report-all --workers 3 --config " + q(dir.path / "replay.json") + " --out " +
                             q(dir.path / "c")) == 0,
            "manifest replay failed");
  if (!o.ok()) return;
  std::size_t n = 0, bytes = 0;
  for (const auto& name : manifest["outputs"]) {
    const auto f = name.get<std::string>();
    const auto a = text::read_file((dir.path / "a" / f).string());
    o.require(a == text::read_file((dir.path / "b" / f).string()), f + " differs between repeated runs");
    o.require(a == text::read_file((dir.path / "c" / f).string()), f + " differs on manifest replay");
    ++n;
    bytes += a.size();
  }
  o.require(n >= 10, "too few output tables");
  o.info << n << " tables, " << bytes << " bytes compared across 3 runs";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string cli;
  std::vector<int> only;
  int seeds = 10;
  app.add_option("--cli", cli, "Path of the cdrstig executable");
  app.add_option("--only", only, "Run only these criteria");
  app.add_option("--seeds", seeds, "Seeds per plant for criterion 7")->check(CLI::Range(1, 100));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<int, std::function<void(Outcome&)>>> criteria = {
      {1, criterion1},
      {2, criterion2},
      {3, criterion3},
      {4, criterion4},
      {5, criterion5},
      {6, criterion6},
      {7, [&](Outcome& o) { criterion7(o, seeds); }},
      {8, criterion8},
      {9, [&](Outcome& o) { criterion9(o, cli); }},
  };
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    std::printf("criterion %d: %s  %s\n", id, o.ok() ? "PASS" : "FAIL", o.info.str().c_str());
    for (const auto& f : o.failures) std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
    failed += !o.ok();
  }
  return failed == 0 ? 0 : 1;
}
