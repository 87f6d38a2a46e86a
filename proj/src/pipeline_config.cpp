#include <filesystem>
#include <set>

#include "cdrstig/error.hpp"
#include "cdrstig/pipeline.hpp"
#include "cdrstig/text.hpp"
#include "json.hpp"

namespace cdrstig::pipeline {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

/// Reads keys from one JSON object and rejects any key it was not asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) invalid(path_ + " must be an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  void get(const char* key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) invalid(where(key) + " must be a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) invalid(where(key) + " must be an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, unsigned& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) invalid(where(key) + " must be a non-negative integer");
      out = v->get<unsigned>();
    }
  }
  void get(const char* key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) invalid(where(key) + " must be a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const char* key, std::int64_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) invalid(where(key) + " must be an integer");
      out = v->get<std::int64_t>();
    }
  }
  void get(const char* key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) invalid(where(key) + " must be true or false");
      out = v->get<bool>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) invalid(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }
  template <class E>
  void get_enum(const char* key, E& out, std::initializer_list<std::pair<std::string_view, E>> names) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    for (const auto& [n, e] : names)
      if (n == s) {
        out = e;
        return;
      }
    std::string allowed;
    for (const auto& [n, e] : names) allowed += (allowed.empty() ? "" : ", ") + std::string(n);
    invalid(where(key) + " must be one of: " + allowed);
  }

  std::string where(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) invalid("unknown configuration key " + path_ + "." + k);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

cdr::Timestamp parse_day(const json& v, const std::string& where) {
  if (!v.is_string()) invalid(where + " must be a YYYY-MM-DD string");
  const auto t = cdr::parse_date(v.get<std::string>());
  if (!t) invalid(where + " is not a valid YYYY-MM-DD date");
  return *t;
}

const std::initializer_list<std::pair<std::string_view, cdr::PeriodScheme>> kSchemes = {
    {"two_weeks", cdr::PeriodScheme::TwoWeeks}, {"calendar_month", cdr::PeriodScheme::CalendarMonth}};
const std::initializer_list<std::pair<std::string_view, stig::EvaporationMode>> kModes = {
    {"multiplicative", stig::EvaporationMode::Multiplicative},
    {"subtractive", stig::EvaporationMode::Subtractive}};
const std::initializer_list<std::pair<std::string_view, stats::WeightConstruction>> kWeights = {
    {"min_max_distance", stats::WeightConstruction::MinMaxDistance},
    {"inverse_distance", stats::WeightConstruction::InverseDistance}};
const std::initializer_list<std::pair<std::string_view, metrics::CrMode>> kCrModes = {
    {"zeros", metrics::CrMode::Zeros}, {"pairwise_complete", metrics::CrMode::PairwiseComplete}};
const std::initializer_list<std::pair<std::string_view, MsX>> kMsX = {
    {"group_mean_il", MsX::GroupMeanIl}, {"bin_midpoint", MsX::BinMidpoint}};
const std::initializer_list<std::pair<std::string_view, PctMode>> kPct = {
    {"pooled", PctMode::Pooled}, {"user_mean", PctMode::UserMean}};

template <class E>
std::string name_of(E e, std::initializer_list<std::pair<std::string_view, E>> names) {
  for (const auto& [n, v] : names)
    if (v == e) return std::string(n);
  return "?";
}

synth::SynthConfig parse_synth(const json& j) {
  synth::SynthConfig s;
  ObjectReader r(j, "synth");
  r.get("seed", s.seed);
  r.get("year", s.year);
  if (const json* c = r.find("city")) {
    ObjectReader cr(*c, "synth.city");
    auto& city = s.city;
    cr.get("grid_rows", city.grid_rows);
    cr.get("grid_cols", city.grid_cols);
    cr.get("spacing_m", city.spacing_m);
    cr.get("jitter_m", city.jitter_m);
    cr.get("residential_per_district", city.residential_per_district);
    cr.get("hotspots_per_district", city.hotspots_per_district);
    cr.get("enclaves_per_district", city.enclaves_per_district);
    cr.get("core_radius_m", city.core_radius_m);
    cr.get("enclave_radius_m", city.enclave_radius_m);
    cr.get("enclave_clearance_m", city.enclave_clearance_m);
    cr.get("center_lat", city.center.lat);
    cr.get("center_lon", city.center.lon);
    cr.get("rent_min", city.rent_min);
    cr.get("rent_max", city.rent_max);
    cr.get("rent_tiers", city.rent_tiers);
    cr.finish();
  }
  if (const json* p = r.find("population")) {
    ObjectReader pr(*p, "synth.population");
    auto& pop = s.population;
    pr.get("n_locals", pop.n_locals);
    pr.get("n_refugees", pop.n_refugees);
    pr.get("kappa_mobility", pop.kappa_mobility);
    pr.get("kappa_routine", pop.kappa_routine);
    pr.get("kappa_cost", pop.kappa_cost);
    pr.get("active_share", pop.active_share);
    pr.get("active_rate_floor", pop.active_rate_floor);
    pr.get("active_rate_extra", pop.active_rate_extra);
    pr.get("inactive_rate_min", pop.inactive_rate_min);
    pr.get("inactive_rate_max", pop.inactive_rate_max);
    pr.get("unknown_callee_share", pop.unknown_callee_share);
    pr.get("local_to_local", pop.local_to_local);
    pr.get("residential_day_share", pop.residential_day_share);
    pr.get("affordability_bandwidth", pop.affordability_bandwidth);
    pr.get("move_base", pop.move_base);
    pr.get("move_cost_gain", pop.move_cost_gain);
    pr.get("shared_refugee_trace", pop.shared_refugee_trace);
    pr.get("mean_duration_s", pop.mean_duration_s);
    pr.finish();
  }
  if (const json* e = r.find("events")) {
    if (!e->is_array()) invalid("synth.events must be an array");
    for (std::size_t i = 0; i < e->size(); ++i) {
      const std::string where = "synth.events[" + std::to_string(i) + "]";
      ObjectReader er((*e)[i], where);
      synth::EventConfig ev;
      if (const json* d = er.find("date")) ev.date = parse_day(*d, where + ".date");
      else invalid(where + ".date is required");
      er.get("severity", ev.severity);
      er.get("low_il_multiplier", ev.low_il_multiplier);
      er.finish();
      s.events.push_back(ev);
    }
  }
  r.finish();
  return s;
}

json synth_to_json(const synth::SynthConfig& s) {
  const auto& c = s.city;
  const auto& p = s.population;
  json events = json::array();
  for (const auto& e : s.events)
    events.push_back({{"date", cdr::format_date(e.date)},
                      {"severity", e.severity},
                      {"low_il_multiplier", e.low_il_multiplier}});
  return json{
      {"seed", s.seed},
      {"year", s.year},
      {"city",
       {{"grid_rows", c.grid_rows},
        {"grid_cols", c.grid_cols},
        {"spacing_m", c.spacing_m},
        {"jitter_m", c.jitter_m},
        {"residential_per_district", c.residential_per_district},
        {"hotspots_per_district", c.hotspots_per_district},
        {"enclaves_per_district", c.enclaves_per_district},
        {"core_radius_m", c.core_radius_m},
        {"enclave_radius_m", c.enclave_radius_m},
        {"enclave_clearance_m", c.enclave_clearance_m},
        {"center_lat", c.center.lat},
        {"center_lon", c.center.lon},
        {"rent_min", c.rent_min},
        {"rent_max", c.rent_max},
        {"rent_tiers", c.rent_tiers}}},
      {"population",
       {{"n_locals", p.n_locals},
        {"n_refugees", p.n_refugees},
        {"kappa_mobility", p.kappa_mobility},
        {"kappa_routine", p.kappa_routine},
        {"kappa_cost", p.kappa_cost},
        {"active_share", p.active_share},
        {"active_rate_floor", p.active_rate_floor},
        {"active_rate_extra", p.active_rate_extra},
        {"inactive_rate_min", p.inactive_rate_min},
        {"inactive_rate_max", p.inactive_rate_max},
        {"unknown_callee_share", p.unknown_callee_share},
        {"local_to_local", p.local_to_local},
        {"residential_day_share", p.residential_day_share},
        {"affordability_bandwidth", p.affordability_bandwidth},
        {"move_base", p.move_base},
        {"move_cost_gain", p.move_cost_gain},
        {"shared_refugee_trace", p.shared_refugee_trace},
        {"mean_duration_s", p.mean_duration_s}}},
      {"events", events}};
}

}  // namespace

void RunConfig::validate() const {
  if (!(min_avg_calls_per_day > 0.0)) invalid("min_avg_calls_per_day must be positive");
  if (long_term_min_months < 1 || long_term_min_months > 12)
    invalid("long_term_min_months must lie in 1..12");
  if (workers < 1) invalid("workers must be at least 1");
  if (stats.n_trials < 1) invalid("stats.n_trials must be at least 1");
  if (stats.n_groups < 2) invalid("stats.n_groups must be at least 2");
  if (!(stats.inverse_epsilon > 0.0 && stats.inverse_epsilon <= 1.0))
    invalid("stats.inverse_epsilon must lie in (0, 1]");
  if (study_year < 1971 || study_year > 9998) invalid("study_year out of range");
  engine.validate();
  if (synth) synth->validate();
}

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    invalid(std::string("configuration is not valid JSON: ") + e.what());
  }
  RunConfig c;
  ObjectReader r(j, "config");
  if (const json* in = r.find("inputs")) {
    ObjectReader ir(*in, "config.inputs");
    ir.get("fgmd", c.inputs.fgmd);
    ir.get("cgmd", c.inputs.cgmd);
    ir.get("atd", c.inputs.atd);
    ir.get("antennas", c.inputs.antennas);
    ir.get("districts", c.inputs.districts);
    ir.finish();
  }
  r.get("study_year", c.study_year);
  if (const json* area = r.find("study_area")) {
    if (!area->is_array()) invalid("config.study_area must be an array of district ids");
    for (const auto& d : *area) {
      if (!d.is_string()) invalid("config.study_area entries must be strings");
      c.study_area.push_back(d.get<std::string>());
    }
  }
  r.get_enum("period_scheme", c.period_scheme, kSchemes);
  r.get("min_avg_calls_per_day", c.min_avg_calls_per_day);
  r.get("long_term_min_months", c.long_term_min_months);
  bool strict = c.strictness == cdr::Strictness::Strict;
  r.get("strict", strict);
  c.strictness = strict ? cdr::Strictness::Strict : cdr::Strictness::Lenient;
  r.get("workers", c.workers);
  if (const json* e = r.find("engine")) {
    ObjectReader er(*e, "config.engine");
    er.get("delta", c.engine.policy.delta);
    er.get_enum("evaporation", c.engine.policy.mode, kModes);
    er.get("mark_base_m", c.engine.mark.base_radius_m);
    er.get("mark_top_m", c.engine.mark.top_radius_m);
    er.get("mark_peak", c.engine.mark.peak);
    er.get("cell_size_m", c.engine.cell_size_m);
    er.get("step_seconds", c.engine.step_seconds);
    er.finish();
  }
  if (const json* s = r.find("stats")) {
    ObjectReader sr(*s, "config.stats");
    sr.get("n_perm", c.stats.n_perm);
    sr.get("seed", c.stats.seed);
    sr.get("n_trials", c.stats.n_trials);
    sr.get("n_groups", c.stats.n_groups);
    sr.get_enum("weight_matrix", c.stats.weights, kWeights);
    sr.get("row_standardize", c.stats.row_standardize);
    sr.get("inverse_epsilon", c.stats.inverse_epsilon);
    sr.get_enum("cr_mode", c.stats.cr_mode, kCrModes);
    sr.get_enum("ms_x", c.stats.ms_x, kMsX);
    sr.get_enum("pct_mode", c.stats.pct_mode, kPct);
    sr.finish();
  }
  if (const json* ev = r.find("events")) {
    if (!ev->is_array()) invalid("config.events must be an array of YYYY-MM-DD dates");
    for (std::size_t i = 0; i < ev->size(); ++i)
      c.events.push_back(parse_day((*ev)[i], "config.events[" + std::to_string(i) + "]"));
  }
  r.get("out_dir", c.out_dir);
  if (const json* s = r.find("synth")) c.synth = parse_synth(*s);
  r.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::string body;
  try {
    body = text::read_file(path);
  } catch (const Error& e) {
    invalid(std::string("cannot read configuration: ") + e.what());
  }
  RunConfig c = parse_config(body);
  // Relative input paths are taken relative to the configuration file and
  // stored absolute, so the manifest echo can be replayed from anywhere.
  const auto base = std::filesystem::absolute(std::filesystem::path(path)).parent_path();
  for (std::string* p : {&c.inputs.fgmd, &c.inputs.cgmd, &c.inputs.atd, &c.inputs.antennas,
                         &c.inputs.districts})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  json events = json::array();
  for (auto e : c.events) events.push_back(cdr::format_date(e));
  json j{
      {"inputs",
       {{"fgmd", c.inputs.fgmd},
        {"cgmd", c.inputs.cgmd},
        {"atd", c.inputs.atd},
        {"antennas", c.inputs.antennas},
        {"districts", c.inputs.districts}}},
      {"study_year", c.study_year},
      {"study_area", c.study_area},
      {"period_scheme", name_of(c.period_scheme, kSchemes)},
      {"min_avg_calls_per_day", c.min_avg_calls_per_day},
      {"long_term_min_months", c.long_term_min_months},
      {"strict", c.strictness == cdr::Strictness::Strict},
      {"workers", c.workers},
      {"engine",
       {{"delta", c.engine.policy.delta},
        {"evaporation", name_of(c.engine.policy.mode, kModes)},
        {"mark_base_m", c.engine.mark.base_radius_m},
        {"mark_top_m", c.engine.mark.top_radius_m},
        {"mark_peak", c.engine.mark.peak},
        {"cell_size_m", c.engine.cell_size_m},
        {"step_seconds", c.engine.step_seconds}}},
      {"stats",
       {{"n_perm", c.stats.n_perm},
        {"seed", c.stats.seed},
        {"n_trials", c.stats.n_trials},
        {"n_groups", c.stats.n_groups},
        {"weight_matrix", name_of(c.stats.weights, kWeights)},
        {"row_standardize", c.stats.row_standardize},
        {"inverse_epsilon", c.stats.inverse_epsilon},
        {"cr_mode", name_of(c.stats.cr_mode, kCrModes)},
        {"ms_x", name_of(c.stats.ms_x, kMsX)},
        {"pct_mode", name_of(c.stats.pct_mode, kPct)}}},
      {"events", events},
      {"out_dir", c.out_dir}};
  if (c.synth) j["synth"] = synth_to_json(*c.synth);
  return j.dump(2);
}

void check_inputs_exist(const RunConfig& c) {
  for (const std::string* p : {&c.inputs.fgmd, &c.inputs.cgmd, &c.inputs.atd, &c.inputs.antennas,
                               &c.inputs.districts})
    if (!p->empty() && !std::filesystem::is_regular_file(*p))
      throw Error(ErrorCode::Io, "input file '" + *p + "' does not exist");
}

}  // namespace cdrstig::pipeline
