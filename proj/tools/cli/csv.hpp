#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "siprop/core_model.hpp"

namespace siprop::cli {

struct CsvSchema {
  std::string outcome = "y";
  std::string treatment = "t";
  /// Keep only rows whose column equals the value (string comparison).
  std::vector<std::pair<std::string, std::string>> filters;
  /// Columns to drop from the covariates.
  std::vector<std::string> ignore;
};

/// Reads a dataset: outcome and treatment columns, optional e1..eH
/// propensity columns, and every other column as a named covariate.
Dataset ingest_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const CsvSchema& schema = {}, const std::string& source = "<stream>");

/// Writes a dataset in the format read by ingest_csv.
void write_csv(std::ostream& out, const Dataset& ds);

}  // namespace siprop::cli
