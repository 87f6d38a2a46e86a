#include "cdrstig/dataset.hpp"

#include <algorithm>

#include "cdrstig/error.hpp"

namespace cdrstig {

namespace {

template <class Rec>
std::size_t enforce_year(std::vector<Rec>& recs, const cdr::StudyYear& year,
                         cdr::Strictness strictness, const std::string& path) {
  const auto outside = [&](const Rec& r) { return !year.contains(r.ts); };
  if (strictness == cdr::Strictness::Strict) {
    const auto it = std::find_if(recs.begin(), recs.end(), outside);
    if (it != recs.end())
      throw Error(ErrorCode::TimestampOutOfStudyYear,
                  path + ": " + cdr::format_timestamp(it->ts) + " is outside " +
                      std::to_string(year.year()));
    return 0;
  }
  const auto before = recs.size();
  std::erase_if(recs, outside);
  return before - recs.size();
}

}  // namespace

Dataset load_dataset(const InputPaths& paths, int study_year, cdr::Strictness strictness,
                     LoadReport* report, unsigned workers) {
  Dataset ds;
  ds.year = cdr::StudyYear(study_year);
  if (paths.antennas.empty())
    throw Error(ErrorCode::ConfigInvalid, "an antenna registry path is required");
  cdr::read_antenna_registry(paths.antennas, ds.registry);
  if (!paths.districts.empty()) cdr::read_district_attributes(paths.districts, ds.registry);

  LoadReport local;
  LoadReport& rep = report ? *report : local;
  if (!paths.fgmd.empty()) {
    cdr::IngestReport r;
    ds.fgmd = cdr::read_fgmd(paths.fgmd, ds.registry, ds.users, strictness, &r, workers);
    rep.out_of_year += enforce_year(ds.fgmd, ds.year, strictness, paths.fgmd);
    rep.files.push_back(std::move(r));
  }
  if (!paths.cgmd.empty()) {
    cdr::IngestReport r;
    ds.cgmd = cdr::read_cgmd(paths.cgmd, ds.registry, ds.users, strictness, &r);
    rep.out_of_year += enforce_year(ds.cgmd, ds.year, strictness, paths.cgmd);
    rep.files.push_back(std::move(r));
  }
  if (!paths.atd.empty()) {
    cdr::IngestReport r;
    ds.atd = cdr::read_atd(paths.atd, ds.registry, strictness, &r);
    rep.out_of_year += enforce_year(ds.atd, ds.year, strictness, paths.atd);
    rep.files.push_back(std::move(r));
  }
  return ds;
}

}  // namespace cdrstig
