#include "vulnpipe/dedup.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace {

std::vector<Fingerprint> fingerprints(const std::vector<FunctionPair>& corpus) {
  std::vector<Fingerprint> fps;
  fps.reserve(corpus.size());
  for (const auto& p : corpus) fps.push_back(fingerprint(p));
  return fps;
}

StageResult keep_if(std::vector<FunctionPair> corpus, const std::vector<bool>& keep) {
  StageResult r;
  r.survivors.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i])
      r.survivors.push_back(std::move(corpus[i]));
    else
      ++r.removed;
  }
  return r;
}

}  // namespace

StageResult dedup_complete_pairs(std::vector<FunctionPair> corpus) {
  const auto fps = fingerprints(corpus);
  std::unordered_set<Fingerprint, FingerprintHash> seen;
  std::vector<bool> keep(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) keep[i] = seen.insert(fps[i]).second;
  return keep_if(std::move(corpus), keep);
}

StageResult dedup_self_identical(std::vector<FunctionPair> corpus) {
  const auto fps = fingerprints(corpus);
  std::vector<bool> keep(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) keep[i] = fps[i].vuln_fp != fps[i].fixed_fp;
  return keep_if(std::move(corpus), keep);
}

StageResult dedup_cross_matched(std::vector<FunctionPair> corpus) {
  const auto fps = fingerprints(corpus);
  std::unordered_map<Digest, std::size_t, DigestHash> fixed_count;
  for (const auto& f : fps) ++fixed_count[f.fixed_fp];
  std::vector<bool> keep(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = fixed_count.find(fps[i].vuln_fp);
    std::size_t others = it == fixed_count.end() ? 0 : it->second;
    // A pair's own fixed side does not count as a conflict.
    if (fps[i].fixed_fp == fps[i].vuln_fp) --others;
    keep[i] = others == 0;
  }
  return keep_if(std::move(corpus), keep);
}

void DedupReport::check() const {
  for (std::size_t k = 0; k < stages.size(); ++k) {
    if (stages[k].remaining > stages[k].initial)
      throw Error(ErrorCode::InvariantViolation, scope + ": stage remaining exceeds initial");
    if (k > 0 && stages[k].initial != stages[k - 1].remaining)
      throw Error(ErrorCode::InvariantViolation, scope + ": stages do not chain");
  }
}

std::pair<std::vector<FunctionPair>, DedupReport> run_stages(std::vector<FunctionPair> corpus,
                                                             std::string scope) {
  DedupReport report;
  report.scope = std::move(scope);
  using StageFn = StageResult (*)(std::vector<FunctionPair>);
  constexpr std::array<StageFn, 3> kStages{dedup_complete_pairs, dedup_self_identical,
                                           dedup_cross_matched};
  for (std::size_t k = 0; k < kStages.size(); ++k) {
    report.stages[k].initial = corpus.size();
    auto r = kStages[k](std::move(corpus));
    corpus = std::move(r.survivors);
    report.stages[k].remaining = corpus.size();
  }
  for (auto& p : corpus) {
    if (!p.is_terminal()) p.tag(Status::deduped);
  }
  report.check();
  return {std::move(corpus), std::move(report)};
}

DedupRun run_dedup_pipeline(const std::map<std::string, std::vector<FunctionPair>>& corpora,
                            const std::vector<std::string>& priority) {
  for (const auto& [name, _] : corpora) {
    if (std::find(priority.begin(), priority.end(), name) == priority.end())
      throw Error(ErrorCode::UnknownDataset, "dataset '" + name + "' missing from priority list");
  }

  DedupRun run;
  DedupReport total;
  total.scope = "Total";
  std::vector<FunctionPair> concatenated;
  for (const auto& name : priority) {
    auto it = corpora.find(name);
    if (it == corpora.end()) continue;
    auto [survivors, report] = run_stages(it->second, name);
    for (std::size_t k = 0; k < 3; ++k) {
      total.stages[k].initial += report.stages[k].initial;
      total.stages[k].remaining += report.stages[k].remaining;
    }
    run.reports.push_back(std::move(report));
    concatenated.insert(concatenated.end(), survivors.begin(), survivors.end());
    run.per_dataset.emplace(name, std::move(survivors));
  }

  auto [merged, merged_report] = run_stages(std::move(concatenated), "merged");
  run.merged = std::move(merged);
  run.reports.push_back(std::move(merged_report));
  total.check();
  run.reports.push_back(std::move(total));
  return run;
}

// ---------------------------------------------------------------------------
// Overlap matrix

OverlapMatrix::OverlapMatrix(std::vector<std::string> datasets)
    : datasets_(std::move(datasets)),
      cells_(datasets_.size(), std::vector<std::optional<double>>(datasets_.size())) {}

std::size_t OverlapMatrix::index_of(const std::string& name) const {
  auto it = std::find(datasets_.begin(), datasets_.end(), name);
  if (it == datasets_.end()) throw Error(ErrorCode::UnknownDataset, "no dataset '" + name + "'");
  return static_cast<std::size_t>(it - datasets_.begin());
}

std::optional<double> OverlapMatrix::at(const std::string& row, const std::string& col) const {
  return cells_[index_of(row)][index_of(col)];
}

void OverlapMatrix::set(const std::string& row, const std::string& col, double value) {
  cells_[index_of(row)][index_of(col)] = value;
}

std::string OverlapMatrix::to_csv() const {
  std::ostringstream os;
  os << "dataset";
  for (const auto& d : datasets_) os << ',' << csv_field(d);
  os << '\n';
  for (std::size_t r = 0; r < datasets_.size(); ++r) {
    os << csv_field(datasets_[r]);
    for (std::size_t c = 0; c < datasets_.size(); ++c) {
      os << ',';
      if (cells_[r][c])
        os << fixed(*cells_[r][c] * 100.0, 2) << '%';
      else
        os << '-';
    }
    os << '\n';
  }
  return os.str();
}

OverlapMatrix overlap_matrix(const std::map<std::string, std::vector<FunctionPair>>& corpora,
                             const std::vector<std::string>& order) {
  std::vector<std::string> names;
  for (const auto& n : order)
    if (corpora.contains(n)) names.push_back(n);
  for (const auto& [n, _] : corpora)
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);

  std::map<std::string, std::unordered_set<Fingerprint, FingerprintHash>> index;
  for (const auto& n : names) {
    const auto& corpus = corpora.at(n);
    if (corpus.empty()) throw Error(ErrorCode::EmptyCorpus, "dataset '" + n + "' has no rows");
    auto& set = index[n];
    for (const auto& p : corpus) set.insert(fingerprint(p));
  }

  OverlapMatrix m(names);
  for (const auto& a : names) {
    const auto& rows = corpora.at(a);
    std::vector<Fingerprint> fps = fingerprints(rows);
    for (const auto& b : names) {
      if (a == b) continue;
      const auto& other = index.at(b);
      std::size_t shared = 0;
      for (const auto& f : fps) shared += other.contains(f) ? 1 : 0;
      m.set(a, b, static_cast<double>(shared) / static_cast<double>(rows.size()));
    }
  }
  return m;
}

}  // namespace vulnpipe
