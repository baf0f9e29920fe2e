#include "vulnpipe/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

std::vector<CweId> load_cwe_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  std::vector<CweId> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line.substr(0, line.find('#')));
    if (!t.empty()) out.push_back(CweId::parse(t));
  }
  return out;
}

std::vector<CweId> default_top25() {
  return load_cwe_list(std::filesystem::path(VULNPIPE_DATA_DIR) / "top25_cwes.txt");
}

std::vector<DistributionRow> cwe_distribution(const std::vector<FunctionPair>& corpus,
                                              const std::vector<CweId>& top25) {
  std::map<CweId, std::size_t> counts;
  std::size_t incidences = 0;
  for (const auto& p : corpus) {
    // A label repeated within one record still counts once.
    for (const auto& c : std::set<CweId>(p.cwes.begin(), p.cwes.end())) {
      ++counts[c];
      ++incidences;
    }
  }
  const std::set<CweId> flagged(top25.begin(), top25.end());
  std::vector<DistributionRow> rows;
  for (const auto& [cwe, n] : counts)
    rows.push_back({cwe, n, flagged.contains(cwe), static_cast<double>(n) / static_cast<double>(incidences)});
  std::stable_sort(rows.begin(), rows.end(), [](const DistributionRow& a, const DistributionRow& b) {
    return a.count != b.count ? a.count > b.count : a.cwe < b.cwe;
  });
  return rows;
}

std::string imbalance_ratio(const std::vector<DistributionRow>& rows) {
  std::size_t hi = 0, lo = 0;
  for (const auto& r : rows) {
    if (r.count == 0) continue;
    hi = std::max(hi, r.count);
    lo = lo == 0 ? r.count : std::min(lo, r.count);
  }
  if (hi == 0) throw Error(ErrorCode::EmptyDistribution, "no CWE has a positive count");
  return std::to_string(std::llround(static_cast<double>(hi) / static_cast<double>(lo))) + ":1";
}

TableFormat parse_table_format(std::string_view text) {
  const auto t = to_lower(trim(text));
  if (t == "csv") return TableFormat::csv;
  if (t == "markdown" || t == "md") return TableFormat::markdown;
  throw Error(ErrorCode::ConfigInvalid, "unknown table format '" + std::string(text) + "'");
}

std::string render_distribution(const std::vector<DistributionRow>& rows, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::csv) {
    out << "cwe,count,top25,share\n";
    for (const auto& r : rows)
      out << r.cwe.str() << ',' << r.count << ',' << (r.top25 ? "true" : "false") << ',' << fixed(r.share, 6) << '\n';
  } else {
    out << "| CWE | Count | Top 25 | Share |\n|---|---:|:---:|---:|\n";
    for (const auto& r : rows)
      out << "| " << r.cwe.str() << " | " << with_thousands(r.count) << " | " << (r.top25 ? "yes" : "no") << " | "
          << fixed(100.0 * r.share, 2) << "% |\n";
  }
  return out.str();
}

std::string removed_cell(const StageCounts& stage) {
  return with_thousands(stage.removed()) + " (" + fixed(100.0 * stage.removed_fraction(), 2) + "%)";
}

DuplicationTable duplication_summary(const std::vector<DedupReport>& reports) {
  DuplicationTable table{reports};
  const bool has_total = std::any_of(reports.begin(), reports.end(), [](const DedupReport& r) { return r.scope == "Total"; });
  if (!has_total) {
    DedupReport total;
    total.scope = "Total";
    for (const auto& r : reports) {
      if (r.scope == "merged") continue;
      for (int k = 0; k < 3; ++k) {
        total.stages[k].initial += r.stages[k].initial;
        total.stages[k].remaining += r.stages[k].remaining;
      }
    }
    table.rows.push_back(total);
  }
  for (const auto& r : table.rows) r.check();
  return table;
}

std::string DuplicationTable::to_csv() const {
  std::ostringstream out;
  out << "dataset";
  for (const char* stage : {"complete_pair", "self_identical", "cross_matched"})
    out << ',' << stage << "_initial," << stage << "_after," << stage << "_removed," << stage << "_removed_pct";
  out << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.scope);
    for (const auto& s : r.stages)
      out << ',' << s.initial << ',' << s.remaining << ',' << s.removed() << ',' << fixed(100.0 * s.removed_fraction(), 2);
    out << '\n';
  }
  return out.str();
}

std::string DuplicationTable::to_markdown() const {
  std::ostringstream out;
  out << "| Dataset | Complete pair: initial | after | removed (%) "
         "| Self-identical: remain | after | removed (%) "
         "| Cross-matched: remain | after | removed (%) |\n"
         "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& r : rows) {
    out << "| " << r.scope;
    for (const auto& s : r.stages)
      out << " | " << with_thousands(s.initial) << " | " << with_thousands(s.remaining) << " | " << removed_cell(s);
    out << " |\n";
  }
  return out.str();
}

std::string DuplicationTable::render(TableFormat format) const {
  return format == TableFormat::csv ? to_csv() : to_markdown();
}

}  // namespace vulnpipe
