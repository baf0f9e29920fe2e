#pragma once

// Three-stage exact-duplicate removal over whitespace-normalized code, plus the
// cross-dataset overlap matrix.
//
// Stage order is fixed: complete-pair duplicates, then self-identical pairs,
// then cross-matched conflicts. Every stage keeps survivors in input order.

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

struct StageResult {
  std::vector<FunctionPair> survivors;
  std::size_t removed = 0;
};

/// Keeps the first pair of every (vuln_fp, fixed_fp) group.
StageResult dedup_complete_pairs(std::vector<FunctionPair> corpus);

/// Drops pairs whose normalized vulnerable and fixed code are equal.
StageResult dedup_self_identical(std::vector<FunctionPair> corpus);

/// Drops every pair whose vulnerable side equals the fixed side of a different
/// pair. Judged against the stage-entry snapshot, so removals never cascade.
StageResult dedup_cross_matched(std::vector<FunctionPair> corpus);

enum class DedupStage { complete_pair = 0, self_identical = 1, cross_matched = 2 };

struct StageCounts {
  std::size_t initial = 0;
  std::size_t remaining = 0;

  std::size_t removed() const { return initial - remaining; }
  /// removed / initial, 0 when initial is 0.
  double removed_fraction() const {
    return initial == 0 ? 0.0 : static_cast<double>(removed()) / static_cast<double>(initial);
  }
};

struct DedupReport {
  std::string scope;  // dataset name, "merged", or "Total"
  std::array<StageCounts, 3> stages{};

  const StageCounts& stage(DedupStage s) const { return stages[static_cast<int>(s)]; }
  /// Throws InvariantViolation if the stages do not chain.
  void check() const;
};

/// Runs the three stages in order on one corpus, tagging survivors `deduped`.
std::pair<std::vector<FunctionPair>, DedupReport> run_stages(std::vector<FunctionPair> corpus,
                                                             std::string scope);

struct DedupRun {
  std::vector<FunctionPair> merged;
  /// One row per dataset (priority order), then "merged", then "Total".
  std::vector<DedupReport> reports;
  /// Per-dataset survivors after intra-dataset dedup, keyed by dataset name.
  std::map<std::string, std::vector<FunctionPair>> per_dataset;
};

/// Intra-dataset dedup for each corpus, then a rerun over the concatenation in
/// priority order so cross-dataset duplicates resolve toward higher-priority
/// sources. The "Total" row sums the per-dataset rows.
/// Throws UnknownDataset if a corpus is missing from `priority`.
DedupRun run_dedup_pipeline(const std::map<std::string, std::vector<FunctionPair>>& corpora,
                            const std::vector<std::string>& priority);

/// Asymmetric overlap: cell (A, B) is the fraction of A's pairs whose pair
/// fingerprint also occurs in B. Diagonal cells are undefined.
class OverlapMatrix {
 public:
  OverlapMatrix() = default;
  explicit OverlapMatrix(std::vector<std::string> datasets);

  const std::vector<std::string>& datasets() const { return datasets_; }
  std::optional<double> at(const std::string& row, const std::string& col) const;
  void set(const std::string& row, const std::string& col, double value);

  /// Row/column dataset headers, percentage cells to two decimals, "-" on the diagonal.
  std::string to_csv() const;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::string> datasets_;
  std::vector<std::vector<std::optional<double>>> cells_;
};

/// Throws EmptyCorpus when any corpus has no rows.
OverlapMatrix overlap_matrix(const std::map<std::string, std::vector<FunctionPair>>& corpora,
                             const std::vector<std::string>& order = {});

}  // namespace vulnpipe
