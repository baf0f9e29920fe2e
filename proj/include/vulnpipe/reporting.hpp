#pragma once

// Analytical tables: CWE distribution with Top-25 flags, imbalance ratio and
// the stage-by-stage duplication summary.

#include <filesystem>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"
#include "vulnpipe/dedup.hpp"

namespace vulnpipe {

/// Reads one CWE per line; '#' starts a comment. Throws FileUnreadable or MalformedCwe.
std::vector<CweId> load_cwe_list(const std::filesystem::path& path);
/// The shipped Top-25 list (data/top25_cwes.txt).
std::vector<CweId> default_top25();

struct DistributionRow {
  CweId cwe;
  std::size_t count = 0;
  bool top25 = false;
  double share = 0;
};

/// One row per CWE; a record with k labels counts once for each. Sorted by
/// count descending, then CWE number ascending.
std::vector<DistributionRow> cwe_distribution(const std::vector<FunctionPair>& corpus,
                                              const std::vector<CweId>& top25);

/// round(max / min) over rows with a positive count, as "N:1". Throws EmptyDistribution.
std::string imbalance_ratio(const std::vector<DistributionRow>& rows);

enum class TableFormat { csv, markdown };
TableFormat parse_table_format(std::string_view text);

std::string render_distribution(const std::vector<DistributionRow>& rows, TableFormat format);

/// "177,842 (94.36%)": removed count and its share of the stage input.
std::string removed_cell(const StageCounts& stage);

struct DuplicationTable {
  std::vector<DedupReport> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
  std::string render(TableFormat format) const;
};

/// Keeps the given rows in order and appends a "Total" row summing every
/// per-dataset row when none is present. A "merged" row is kept but never
/// summed.
DuplicationTable duplication_summary(const std::vector<DedupReport>& reports);

}  // namespace vulnpipe
