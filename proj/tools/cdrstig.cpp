// cdrstig: batch analyses over FGMD/CGMD/ATD call records.
//
// Exit codes: 0 ok, 1 input error, 2 config error, 3 internal error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cdrstig/dataset.hpp"
#include "cdrstig/error.hpp"
#include "cdrstig/pipeline.hpp"
#include "cdrstig/synth.hpp"

using namespace cdrstig;

namespace {

enum Exit { kOk = 0, kInput = 1, kConfig = 2, kInternal = 3 };

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict = false;
  bool lenient = false;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "JSON configuration file");
  sub->add_option("--seed", o.seed, "Override stats.seed (synth.seed for `synth`)");
  sub->add_option("--out", o.out, "Output directory (overrides out_dir)");
  auto* s = sub->add_flag("--strict", o.strict, "Fail on any bad input row");
  sub->add_flag("--lenient", o.lenient, "Skip and count rows naming unknown antennas/districts")
      ->excludes(s);
  sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::Range(1u, 256u));
}

pipeline::RunConfig resolve(const Options& o, bool config_required, bool synth_cmd) {
  pipeline::RunConfig cfg;
  if (!o.config_path.empty()) cfg = pipeline::load_config(o.config_path);
  else if (config_required) throw Error(ErrorCode::ConfigInvalid, "--config is required");
  if (o.seed) {
    if (synth_cmd) {
      if (!cfg.synth) cfg.synth.emplace();
      cfg.synth->seed = *o.seed;
    } else {
      cfg.stats.seed = *o.seed;
    }
  }
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.strict) cfg.strictness = cdr::Strictness::Strict;
  if (o.lenient) cfg.strictness = cdr::Strictness::Lenient;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  return cfg;
}

struct Loaded {
  Dataset data;
  LoadReport report;
};

Loaded load(const pipeline::RunConfig& cfg) {
  pipeline::check_inputs_exist(cfg);
  Loaded l;
  l.data = load_dataset(cfg.inputs, cfg.study_year, cfg.strictness, &l.report, cfg.workers);
  return l;
}

void print_ingest(const LoadReport& r) {
  for (const auto& f : r.files) {
    std::printf("%s: rows=%zu accepted=%zu skipped=%zu\n", f.path.c_str(), f.rows, f.accepted,
                f.skipped_total());
    for (const auto& [code, n] : f.skipped) std::printf("  %s=%zu\n", code.c_str(), n);
  }
  if (r.out_of_year) std::printf("out_of_year=%zu\n", r.out_of_year);
}

int run(const std::string& cmd, const Options& o) {
  const bool is_synth = cmd == "synth";
  auto cfg = resolve(o, !is_synth, is_synth);

  if (is_synth) {
    const synth::SynthConfig sc = cfg.synth.value_or(synth::SynthConfig{});
    sc.validate();
    const auto data = synth::generate(sc);
    synth::write_synth(data, cfg.out_dir);
    pipeline::RunLog log;
    log.seeds["synth.seed"] = sc.seed;
    cfg.synth = sc;
    const auto paths = synth::synth_paths(cfg.out_dir);
    cfg.inputs = paths;
    namespace fs = std::filesystem;
    std::vector<std::string> outputs;
    for (const auto* p : {&paths.fgmd, &paths.cgmd, &paths.atd, &paths.antennas, &paths.districts})
      outputs.push_back(fs::path(*p).filename().string());
    outputs.push_back("ground_truth.csv");
    pipeline::write_manifest(cfg, log, nullptr, outputs, cfg.out_dir, cmd);
    std::printf("wrote %zu FGMD records for %zu users to %s\n", data.dataset.fgmd.size(),
                data.dataset.users.size(), cfg.out_dir.c_str());
    return kOk;
  }

  auto loaded = load(cfg);
  const Dataset& ds = loaded.data;

  if (cmd == "ingest-check") {
    pipeline::RunLog log;
    print_ingest(loaded.report);
    if (!ds.atd.empty()) {
      const auto rep = synth::consistency_check(ds.fgmd, ds.atd, ds.registry);
      std::printf("consistent: %zu antenna-hours\n", rep.antenna_hours);
    }
    pipeline::write_manifest(cfg, log, &loaded.report, {}, cfg.out_dir, cmd);
    return kOk;
  }
  if (cmd == "grid-activity") {
    pipeline::RunLog log;
    const auto files = pipeline::write_activity_grids(ds, cfg.strictness, cfg.out_dir, log);
    pipeline::write_manifest(cfg, log, &loaded.report, files, cfg.out_dir, cmd);
    return kOk;
  }

  auto prep = pipeline::prepare(cfg, ds);
  pipeline::Results res;
  std::vector<std::string> extra;
  const bool all = cmd == "report-all";
  if (cmd == "metrics" || all) res.user_metrics = pipeline::user_metrics(prep);
  if (cmd == "cr-il" || all) res.cr_il = pipeline::run_cr_il(prep);
  if (cmd == "district" || all) res.district = pipeline::run_district_analysis(prep);
  if (cmd == "ms-il" || cmd == "event-impact" || all) res.daily_ms = pipeline::compute_daily_ms(prep);
  if (cmd == "ms-il" || all) res.ms_il = pipeline::run_ms_il(prep, *res.daily_ms);
  if (cmd == "event-impact" || all) res.event_impact = pipeline::run_event_impact(prep, *res.daily_ms);
  if (all) extra = pipeline::write_activity_grids(ds, cfg.strictness, cfg.out_dir, prep.log);

  auto files = pipeline::write_tables(res, prep, cfg.out_dir);
  files.insert(files.end(), extra.begin(), extra.end());
  pipeline::write_manifest(cfg, prep.log, &loaded.report, files, cfg.out_dir, cmd);

  if (res.cr_il) std::printf("cr-il: %zu/%zu periods, median r %.4f\n", res.cr_il->r.n,
                             res.cr_il->n_periods_total, res.cr_il->r.median);
  if (res.district)
    for (const auto& c : res.district->correlations)
      std::printf("district %s: r %.4f (n=%zu)\n", c.name.c_str(), c.r, c.n);
  if (res.ms_il) std::printf("ms-il: %zu trials, median r %.4f\n", res.ms_il->r.n, res.ms_il->r.median);
  if (res.event_impact)
    for (const auto& s : res.event_impact->summary)
      std::printf("event-impact %s bin %d: median ratio %.4f\n",
                  std::string(pipeline::to_string(s.measure)).c_str(), s.group, s.ratio.median);
  std::printf("%zu skipped items; outputs in %s\n", prep.log.skipped.size(), cfg.out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stigmergy-based CDR integration analyses"};
  app.require_subcommand(1, 1);
  Options opts;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"ingest-check", "Load every input and report skipped rows"},
      {"grid-activity", "Write 10 km activity and antenna-density grids"},
      {"metrics", "Per-refugee IL and CR for every period"},
      {"cr-il", "Calling regularity vs interaction level per period"},
      {"district", "District RI/DA/CR analysis, distance tables and the spatial lag model"},
      {"ms-il", "Mobility similarity vs interaction level"},
      {"event-impact", "MS and calls-to-locals before/after each event"},
      {"synth", "Generate a synthetic city (config `synth` block)"},
      {"report-all", "Every analysis and grid"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return run(cmd, opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.category()) {
      case ErrorCategory::Input: return kInput;
      case ErrorCategory::Config: return kConfig;
      case ErrorCategory::Internal: return kInternal;
    }
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}
