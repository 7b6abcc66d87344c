#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cbr/case_base.hpp"
#include "cbr/error.hpp"

namespace cbr::cli {

/// Process exit codes.
enum ExitStatus : int {
    kSuccess = 0,
    kDataError = 1,   // parse, validation, not-found, illegal-state
    kUsageError = 2,
    kIoError = 3,
};

int exit_status(ErrorKind kind);

/// Parses a query argument against a schema: either a JSON object or
/// comma-separated key=value pairs, values read by attribute type.
Query parse_query_arg(const CaseSchema& schema, std::string_view text);

/// Loads a case-base file (.json or .csv). The schema is `schema_ref` when
/// given; otherwise the JSON "schemaId" is looked up among the bundled
/// schemas and in schemas/ next to the file. CSV files default to the
/// student schema.
CaseBase load_case_base_arg(const std::filesystem::path& path, const std::string& schema_ref);

/// Score formatting shared by every human-readable output (12 significant digits).
std::string format_score(double score);

/// Runs one CLI invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cbr::cli
