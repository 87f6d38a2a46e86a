#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdrstig/cdr.hpp"
#include "cdrstig/dataset.hpp"
#include "cdrstig/metrics.hpp"
#include "cdrstig/stats.hpp"
#include "cdrstig/stigmergy.hpp"
#include "cdrstig/synth.hpp"

namespace cdrstig::pipeline {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Configuration

enum class MsX { GroupMeanIl, BinMidpoint };
enum class PctMode { Pooled, UserMean };

struct StatsParams {
  std::size_t n_perm = 10'000;
  std::uint64_t seed = 1;
  int n_trials = 5;
  int n_groups = 5;
  stats::WeightConstruction weights = stats::WeightConstruction::MinMaxDistance;
  bool row_standardize = false;
  double inverse_epsilon = 0.1;
  metrics::CrMode cr_mode = metrics::CrMode::Zeros;
  MsX ms_x = MsX::GroupMeanIl;
  PctMode pct_mode = PctMode::Pooled;
};

struct RunConfig {
  InputPaths inputs;
  int study_year = 2017;
  std::vector<std::string> study_area;  // empty: every district in the registry
  cdr::PeriodScheme period_scheme = cdr::PeriodScheme::TwoWeeks;
  double min_avg_calls_per_day = 2.0;
  int long_term_min_months = 6;
  cdr::Strictness strictness = cdr::Strictness::Strict;
  unsigned workers = 1;
  stig::EngineConfig engine;
  StatsParams stats;
  std::vector<cdr::Timestamp> events;  // midnights
  std::string out_dir = "out";
  std::optional<synth::SynthConfig> synth;  // used by the synth subcommand

  /// Error(ConfigInvalid) on out-of-range parameters.
  void validate() const;
};

/// Parses the JSON configuration; unknown keys are rejected.
/// Error(ConfigInvalid) on any problem.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);
/// Canonical JSON echo of every parameter (also accepted by parse_config).
std::string config_to_json(const RunConfig& config);

/// Error(Io) naming the first configured input that does not exist.
void check_inputs_exist(const RunConfig& config);

// ---------------------------------------------------------------------------
// Run bookkeeping

struct Skip {
  std::string scope;   // period, day, district, event, ...
  std::string item;
  std::string reason;  // error code name or a short machine-readable tag
};

struct FunnelStage {
  std::string stage;
  std::size_t count = 0;
};

struct RunLog {
  std::vector<Skip> skipped;
  std::map<std::string, std::vector<FunnelStage>> funnels;
  std::map<std::string, std::uint64_t> seeds;

  void skip(std::string scope, std::string item, std::string reason) {
    skipped.push_back(Skip{std::move(scope), std::move(item), std::move(reason)});
  }
};

// ---------------------------------------------------------------------------
// Shared preparation

struct PeriodData {
  cdr::Period period;
  cdr::UserSet active;                                      // every class
  std::map<cdr::UserIndex, std::vector<cdr::CallRecord>> by_user;  // active users only
  std::map<cdr::UserIndex, double> refugee_il;              // active refugees
};

/// FGMD selection funnel: unknown callees dropped, records split into
/// periods, activity filter applied per period.
struct Prepared {
  const Dataset* data = nullptr;
  RunConfig config;
  std::vector<PeriodData> periods;
  std::vector<int> period_of_day;  // day index -> position in `periods`, -1 when uncovered
  RunLog log;
};

Prepared prepare(const RunConfig& config, const Dataset& data);

/// Group 1..n of an interaction level with left-closed equal-width bins (1.0
/// in group n). n = 5 matches metrics::il_bin.
int il_group(double il, int n_groups);

struct Summary {
  std::size_t n = 0;
  double q1 = kNaN, median = kNaN, q3 = kNaN;
};
Summary summarize(std::span<const double> values);

/// Seed for a work item, mixing the base seed with up to three coordinates.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

// ---------------------------------------------------------------------------
// Calling regularity vs interaction level

struct CrIlRow {
  int period = 0;
  cdr::Timestamp start = 0;
  std::size_t n_refugees = 0;
  double r = kNaN;
  double p = kNaN;
};

struct CrIlResult {
  std::vector<CrIlRow> rows;
  std::size_t n_periods_total = 0;
  Summary r;
  double p_min = kNaN, p_max = kNaN;
};

CrIlResult run_cr_il(Prepared& prep);

/// Per active refugee and period: IL, bin and CR (the `metrics` subcommand).
struct UserMetricRow {
  int period = 0;
  std::string user_id;
  double il = kNaN;
  int il_bin = 0;
  double cr = kNaN;
};
std::vector<UserMetricRow> user_metrics(Prepared& prep);

// ---------------------------------------------------------------------------
// District analysis

struct DistrictMonthRow {
  std::string district;
  int month = 0;
  std::size_t n_residents = 0;
  double mean_cr = kNaN;
  double ri = kNaN;
  double da = kNaN;
};

struct DistrictCorrelationRow {
  std::string district;
  std::size_t n = 0;
  double r = kNaN;
  double p = kNaN;
};

struct NamedCorrelation {
  std::string name;  // da_cost, cr_cost, euclidean_cost, cosine_cost, dtw_cost
  std::size_t n = 0;
  double r = kNaN;
  double p = kNaN;
};

struct DistrictRow {
  std::string district;
  double rent = kNaN;
  std::size_t resident_months = 0;
  double mean_cr = kNaN;
  double mean_da = kNaN;
  double mean_ri = kNaN;
  double euclidean = kNaN;
  double cosine = kNaN;
  double dtw = kNaN;
};

struct LagTable {
  std::vector<std::string> districts;
  stats::SpatialModel model;
};

struct DistrictResult {
  std::vector<DistrictMonthRow> months;
  std::vector<DistrictCorrelationRow> ri_cr;
  Summary ri_cr_summary;
  std::vector<NamedCorrelation> correlations;
  std::vector<DistrictRow> districts;
  std::optional<LagTable> table2;
  std::vector<std::size_t> ri_histogram;  // 10 equal bins over [0, 1]
};

DistrictResult run_district_analysis(Prepared& prep);

// ---------------------------------------------------------------------------
// Mobility similarity vs interaction level

struct MsCell {
  int day = 0;
  int trial = 0;
  int group = 0;  // 1..n_groups
  std::uint64_t seed = 0;
  std::size_t group_size = 0;
  double group_il = kNaN;
  double ms = kNaN;
};

/// Daily MS for every (day, trial, group), ordered by day, trial, group.
struct DailyMs {
  std::vector<MsCell> cells;
};

DailyMs compute_daily_ms(Prepared& prep);

struct MsIlTrialRow {
  int trial = 0;
  std::size_t n = 0;
  double r = kNaN;
  double p = kNaN;
};

struct MsIlResult {
  std::vector<MsIlTrialRow> rows;
  Summary r;
};

/// One correlation per trial over every (day, group) point of that trial.
MsIlResult run_ms_il(Prepared& prep, const DailyMs& daily);

// ---------------------------------------------------------------------------
// Event impact

enum class ImpactMeasure { Ms, PctCallsToLocals };
std::string_view to_string(ImpactMeasure m) noexcept;

struct EventImpactRow {
  cdr::Timestamp event = 0;
  int group = 0;
  ImpactMeasure measure = ImpactMeasure::Ms;
  double before = kNaN;  // normalized
  double after = kNaN;   // normalized
  double ratio = kNaN;   // NaN when after is zero
};

struct EventImpactSummaryRow {
  int group = 0;
  ImpactMeasure measure = ImpactMeasure::Ms;
  Summary ratio;
};

struct EventImpactResult {
  std::vector<EventImpactRow> rows;
  std::vector<EventImpactSummaryRow> summary;
};

/// before / after; nullopt when after is zero.
std::optional<double> impact_ratio(double before, double after) noexcept;

inline constexpr int kEventWindowDays = 14;

/// Error(EventTooCloseToYearEdge) when an event lacks 14 covered days on
/// either side.
EventImpactResult run_event_impact(Prepared& prep, const DailyMs& daily);

// ---------------------------------------------------------------------------
// Reports

struct Results {
  std::optional<CrIlResult> cr_il;
  std::optional<std::vector<UserMetricRow>> user_metrics;
  std::optional<DistrictResult> district;
  std::optional<DailyMs> daily_ms;
  std::optional<MsIlResult> ms_il;
  std::optional<EventImpactResult> event_impact;
};

/// Writes every present result as CSV tables into `dir`. Returns the file
/// names written.
std::vector<std::string> write_tables(const Results& results, const Prepared& prep,
                                      const std::string& dir);

/// Activity and antenna-density grids at 10 km (the `grid-activity`
/// subcommand). Returns the file names written.
std::vector<std::string> write_activity_grids(const Dataset& data, cdr::Strictness strictness,
                                              const std::string& dir, RunLog& log);

/// Hex SHA-256 of a file's bytes. Error(Io) when unreadable.
std::string sha256_file(const std::string& path);

/// Writes manifest.json: config echo, seeds, input digests, skipped items,
/// funnel counts, ingest reports and output file names.
void write_manifest(const RunConfig& config, const RunLog& log, const LoadReport* ingest,
                    const std::vector<std::string>& outputs, const std::string& dir,
                    std::string_view command);

}  // namespace cdrstig::pipeline
