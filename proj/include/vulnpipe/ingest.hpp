#pragma once

// Adapter-driven loading of heterogeneous vulnerability datasets into the
// unified FunctionPair schema.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

enum class CweParseRule { list, single, absent };

/// How one source dataset maps onto the unified schema. Keys in field_map are
/// unified field names (vuln_code, fixed_code, cve, cwes, language,
/// commit_message); values are CSV column names or dotted JSON key paths.
struct AdapterConfig {
  std::string dataset_name;
  std::map<std::string, std::string> field_map;
  std::optional<std::string> language_default;
  CweParseRule cwe_parse_rule = CweParseRule::list;

  static AdapterConfig from_json(const Json& j);
  static AdapterConfig load(const std::filesystem::path& path);
  /// Throws ConfigInvalid.
  void validate() const;
};

enum class LoadMode { strict, lenient };

struct RowError {
  std::size_t row = 0;  // 1-based data row
  std::string field;
  std::string message;
};

struct LoadResult {
  std::vector<FunctionPair> pairs;
  std::vector<RowError> errors;
  /// Lenient-mode notices for values dropped from otherwise valid rows.
  std::vector<RowError> warnings;
};

/// Format is chosen by extension: .csv, or .jsonl/.ndjson/.json (one object per line).
LoadResult load_dataset(const std::filesystem::path& path, const AdapterConfig& config,
                        LoadMode mode);

/// Parses a raw CWE field per the rule. Unparseable tokens are reported through `bad`.
std::vector<CweId> parse_cwe_field(const Json& value, CweParseRule rule,
                                   std::vector<std::string>& bad);

}  // namespace vulnpipe
