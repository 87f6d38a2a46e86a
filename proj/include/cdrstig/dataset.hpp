#pragma once

#include <string>
#include <vector>

#include "cdrstig/cdr.hpp"

namespace cdrstig {

/// Everything one analysis run reads, resolved against a single registry and
/// user table.
struct Dataset {
  cdr::StudyYear year{2017};
  cdr::Registry registry;
  cdr::UserTable users;
  std::vector<cdr::CallRecord> fgmd;
  std::vector<cdr::CallRecord> cgmd;
  std::vector<cdr::TrafficRecord> atd;
};

struct InputPaths {
  std::string fgmd;
  std::string cgmd;
  std::string atd;
  std::string antennas;
  std::string districts;
};

struct LoadReport {
  std::vector<cdr::IngestReport> files;
  std::size_t out_of_year = 0;  // lenient mode: records outside the study year dropped
};

/// Loads the registry first, then every non-empty record path. Records
/// outside the study year throw Error(TimestampOutOfStudyYear) in strict
/// mode and are dropped (and counted) in lenient mode.
Dataset load_dataset(const InputPaths& paths, int study_year, cdr::Strictness strictness,
                     LoadReport* report = nullptr, unsigned workers = 1);

}  // namespace cdrstig
