#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "cdrstig/error.hpp"
#include "cdrstig/grids.hpp"
#include "cdrstig/pipeline.hpp"
#include "cdrstig/text.hpp"
#include "json.hpp"

namespace cdrstig::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Tables {
 public:
  explicit Tables(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + dir + "': " + ec.message());
  }

  text::CsvWriter open(const std::string& name, std::initializer_list<std::string_view> header) {
    written_.push_back(name);
    text::CsvWriter w((fs::path(dir_) / name).string());
    w.row(header);
    return w;
  }

  std::vector<std::string> written() const { return written_; }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

void summary_fields(text::CsvWriter& w, const Summary& s) { w.field(s.n).field(s.q1).field(s.median).field(s.q3); }

}  // namespace

std::vector<std::string> write_tables(const Results& res, const Prepared& prep, const std::string& dir) {
  Tables t(dir);
  const auto& year = prep.data->year;

  if (res.cr_il) {
    auto w = t.open("cr_il_periods.csv", {"period", "start", "n_refugees", "r", "p"});
    for (const auto& r : res.cr_il->rows) {
      w.field(r.period).field(cdr::format_date(r.start)).field(r.n_refugees).field(r.r).field(r.p);
      w.end_row();
    }
    w.close();
    auto s = t.open("cr_il_summary.csv",
                    {"n_periods_total", "n_periods_used", "r_q1", "r_median", "r_q3", "p_min", "p_max"});
    s.field(res.cr_il->n_periods_total).field(res.cr_il->r.n).field(res.cr_il->r.q1);
    s.field(res.cr_il->r.median).field(res.cr_il->r.q3).field(res.cr_il->p_min).field(res.cr_il->p_max);
    s.end_row();
    s.close();
  }

  if (res.user_metrics) {
    auto w = t.open("user_metrics.csv", {"period", "user_id", "il", "il_bin", "cr"});
    for (const auto& r : *res.user_metrics) {
      w.field(r.period).field(r.user_id).field(r.il).field(r.il_bin).field(r.cr);
      w.end_row();
    }
    w.close();
  }

  if (res.district) {
    const auto& d = *res.district;
    auto m = t.open("district_months.csv", {"district", "month", "n_residents", "mean_cr", "ri", "da"});
    for (const auto& r : d.months) {
      m.field(r.district).field(r.month).field(r.n_residents).field(r.mean_cr).field(r.ri).field(r.da);
      m.end_row();
    }
    m.close();

    auto rc = t.open("district_ri_cr.csv", {"district", "n", "r", "p"});
    for (const auto& r : d.ri_cr) {
      rc.field(r.district).field(r.n).field(r.r).field(r.p);
      rc.end_row();
    }
    rc.close();
    auto rcs = t.open("district_ri_cr_summary.csv", {"n", "r_q1", "r_median", "r_q3"});
    summary_fields(rcs, d.ri_cr_summary);
    rcs.end_row();
    rcs.close();

    auto dt = t.open("district_table.csv", {"district", "rent_cost", "resident_months", "mean_cr",
                                            "mean_da", "mean_ri", "euclidean", "cosine", "dtw"});
    for (const auto& r : d.districts) {
      dt.field(r.district).field(r.rent).field(r.resident_months).field(r.mean_cr).field(r.mean_da);
      dt.field(r.mean_ri).field(r.euclidean).field(r.cosine).field(r.dtw);
      dt.end_row();
    }
    dt.close();

    auto dc = t.open("district_correlations.csv", {"name", "n", "r", "p"});
    auto t1 = t.open("table1.csv", {"measure", "n", "r", "p"});
    for (const auto& c : d.correlations) {
      dc.field(c.name).field(c.n).field(c.r).field(c.p);
      dc.end_row();
      if (c.name == "euclidean_cost" || c.name == "cosine_cost" || c.name == "dtw_cost") {
        t1.field(c.name.substr(0, c.name.size() - 5)).field(c.n).field(c.r).field(c.p);
        t1.end_row();
      }
    }
    dc.close();
    t1.close();

    auto t2 = t.open("table2.csv", {"term", "estimate", "p"});
    if (d.table2) {
      const auto& mdl = d.table2->model;
      const auto row = [&](std::string_view term, double v, double p) {
        t2.field(term).field(v).field(p);
        t2.end_row();
      };
      row("n_districts", static_cast<double>(d.table2->districts.size()), kNaN);
      row("rho", mdl.rho, kNaN);
      const char* names[] = {"intercept", "rent_cost", "da", "ri"};
      for (Eigen::Index i = 0; i < mdl.beta.size() && i < 4; ++i) row(names[i], mdl.beta(i), kNaN);
      row("mse", mdl.mse, kNaN);
      row("log_likelihood", mdl.log_likelihood, kNaN);
      if (mdl.moran_pred) row("moran_fitted", mdl.moran_pred->i, mdl.moran_pred->p);
      if (mdl.moran_resid) row("moran_residuals", mdl.moran_resid->i, mdl.moran_resid->p);
    }
    t2.close();

    auto h = t.open("ri_histogram.csv", {"bin_lo", "bin_hi", "count"});
    for (std::size_t i = 0; i < d.ri_histogram.size(); ++i) {
      h.field(static_cast<double>(i) / 10.0).field(static_cast<double>(i + 1) / 10.0).field(d.ri_histogram[i]);
      h.end_row();
    }
    h.close();
  }

  if (res.daily_ms) {
    auto w = t.open("ms_daily.csv", {"date", "trial", "il_group", "seed", "group_size", "group_il", "ms"});
    auto g = t.open("ms_group_sizes.csv", {"date", "trial", "group_size"});
    for (const auto& c : res.daily_ms->cells) {
      const auto date = cdr::format_date(year.day(c.day));
      w.field(date).field(c.trial).field(c.group).field(std::to_string(c.seed)).field(c.group_size);
      w.field(c.group_il).field(c.ms);
      w.end_row();
      if (c.group == 1) {
        g.field(date).field(c.trial).field(c.group_size);
        g.end_row();
      }
    }
    w.close();
    g.close();
  }

  if (res.ms_il) {
    auto w = t.open("ms_il_trials.csv", {"trial", "n", "r", "p"});
    for (const auto& r : res.ms_il->rows) {
      w.field(r.trial).field(r.n).field(r.r).field(r.p);
      w.end_row();
    }
    w.close();
    auto s = t.open("ms_il_summary.csv", {"n", "r_q1", "r_median", "r_q3"});
    summary_fields(s, res.ms_il->r);
    s.end_row();
    s.close();
  }

  if (res.event_impact) {
    auto w = t.open("event_impact.csv", {"event_date", "il_group", "measure", "before", "after", "ratio"});
    for (const auto& r : res.event_impact->rows) {
      w.field(cdr::format_date(r.event)).field(r.group).field(to_string(r.measure));
      w.field(r.before).field(r.after).field(r.ratio);
      w.end_row();
    }
    w.close();
    auto s = t.open("event_impact_summary.csv",
                    {"il_group", "measure", "n", "ratio_q1", "ratio_median", "ratio_q3"});
    for (const auto& r : res.event_impact->summary) {
      s.field(r.group).field(to_string(r.measure));
      summary_fields(s, r.ratio);
      s.end_row();
    }
    s.close();
  }
  return t.written();
}

std::vector<std::string> write_activity_grids(const Dataset& data, cdr::Strictness strictness,
                                              const std::string& dir, RunLog& log) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory '" + dir + "': " + ec.message());
  const auto spec = geo::registry_grid(data.registry);
  std::vector<std::string> out;
  const auto emit = [&](const std::string& stem, const geo::GridSpec& s, std::span<const double> v,
                        std::size_t oob) {
    geo::write_grid((fs::path(dir) / stem).string(), s, v, {{"out_of_bounds", std::to_string(oob)}});
    if (oob) log.skip("grid", stem, "OutOfBounds:" + std::to_string(oob));
    out.push_back(stem + ".csv");
    out.push_back(stem + ".meta");
  };
  const auto refugee = geo::activity_grid(data.atd, data.registry, spec, geo::DurationVariant::Refugee, strictness);
  emit("activity_refugee", spec, refugee.grid.values(), refugee.out_of_bounds);
  const auto total = geo::activity_grid(data.atd, data.registry, spec, geo::DurationVariant::Total, strictness);
  emit("activity_total", spec, total.grid.values(), total.out_of_bounds);
  const auto density = geo::antenna_density_grid(data.registry, spec, strictness);
  std::vector<double> dv(density.grid.values().begin(), density.grid.values().end());
  emit("antenna_density", spec, dv, density.out_of_bounds);
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read '" + path + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::InvariantViolation, "SHA-256 initialisation failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char b[3];
  for (unsigned i = 0; i < len; ++i) {
    std::snprintf(b, sizeof b, "%02x", md[i]);
    hex += b;
  }
  return hex;
}

void write_manifest(const RunConfig& config, const RunLog& log, const LoadReport* ingest,
                    const std::vector<std::string>& outputs, const std::string& dir,
                    std::string_view command) {
  json m;
  m["command"] = command;
  m["config"] = json::parse(config_to_json(config));

  json inputs = json::array();
  for (const std::string* p : {&config.inputs.fgmd, &config.inputs.cgmd, &config.inputs.atd,
                               &config.inputs.antennas, &config.inputs.districts})
    if (!p->empty() && fs::is_regular_file(*p))
      inputs.push_back({{"path", *p}, {"bytes", fs::file_size(*p)}, {"sha256", sha256_file(*p)}});
  m["inputs"] = inputs;

  if (ingest) {
    json files = json::array();
    for (const auto& f : ingest->files)
      files.push_back({{"path", f.path}, {"rows", f.rows}, {"accepted", f.accepted}, {"skipped", f.skipped}});
    m["ingest"] = {{"files", files}, {"out_of_year_dropped", ingest->out_of_year}};
  }

  m["seeds"] = log.seeds;
  json skipped = json::array();
  for (const auto& s : log.skipped) skipped.push_back({{"scope", s.scope}, {"item", s.item}, {"reason", s.reason}});
  m["skipped"] = skipped;
  json funnels = json::object();
  for (const auto& [name, stages] : log.funnels) {
    json st = json::array();
    for (const auto& s : stages) st.push_back({{"stage", s.stage}, {"count", s.count}});
    funnels[name] = st;
  }
  m["funnels"] = funnels;
  m["outputs"] = outputs;

  std::error_code ec;
  fs::create_directories(dir, ec);
  const auto path = (fs::path(dir) / "manifest.json").string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
  out << m.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace cdrstig::pipeline
