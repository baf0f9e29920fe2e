#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vulnpipe/error.hpp"
#include "vulnpipe/reporting.hpp"

using namespace vulnpipe;
using namespace vulnpipe::testing;

namespace {

DedupReport report(const std::string& scope, std::array<std::size_t, 4> chain) {
  DedupReport r;
  r.scope = scope;
  for (int k = 0; k < 3; ++k) r.stages[k] = {chain[k], chain[k + 1]};
  return r;
}

std::vector<DistributionRow> rows_with_counts(const std::vector<std::size_t>& counts) {
  std::vector<DistributionRow> rows;
  int cwe = 1;
  for (auto c : counts) rows.push_back({CweId(cwe++), c, false, 0});
  return rows;
}

}  // namespace

TEST(Distribution, HandCountedFixture) {
  EXPECT_TRUE(cwe_distribution({}, default_top25()).empty());
  std::vector<FunctionPair> c{pair("a", "1", "2", {79}), pair("a", "3", "4", {79}), pair("a", "5", "6", {89}),
                              pair("a", "7", "8", {79})};
  const auto rows = cwe_distribution(c, default_top25());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].cwe, CweId(79));
  EXPECT_EQ(rows[0].count, 3u);
  EXPECT_EQ(rows[1].cwe, CweId(89));
  EXPECT_EQ(rows[1].count, 1u);
  EXPECT_DOUBLE_EQ(rows[0].share, 0.75);
}

TEST(Distribution, MultiLabelTiesAndFlags) {
  std::vector<FunctionPair> c{pair("a", "1", "2", {9999, 79}), pair("a", "3", "4", {20}), pair("a", "5", "6", {787, 20})};
  const auto rows = cwe_distribution(c, default_top25());
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].cwe, CweId(20));
  // Ties on count 1 sort by CWE number.
  EXPECT_EQ(rows[1].cwe, CweId(79));
  EXPECT_EQ(rows[2].cwe, CweId(787));
  EXPECT_EQ(rows[3].cwe, CweId(9999));
  EXPECT_TRUE(rows[1].top25);
  EXPECT_FALSE(rows[3].top25);
  std::size_t total = 0;
  double share = 0;
  for (const auto& r : rows) total += r.count, share += r.share;
  EXPECT_EQ(total, 5u);
  EXPECT_NEAR(share, 1.0, 1e-9);
  EXPECT_EQ(render_distribution(rows, TableFormat::csv).rfind("cwe,count,top25,share\nCWE-20,2,true,0.400000\n", 0), 0u);
}

TEST(Distribution, DefaultTop25List) {
  const auto top = default_top25();
  ASSERT_EQ(top.size(), 25u);
  EXPECT_EQ(top.front(), CweId(20));
  EXPECT_EQ(top.back(), CweId(798));
  EXPECT_EQ(std::set<CweId>(top.begin(), top.end()).size(), 25u);
}

TEST(Imbalance, RoundsToNearest) {
  const std::vector<std::size_t> published_counts{3484, 3003, 3003, 2822, 2318, 1911, 1378, 1215, 1141, 1085, 762, 644, 620,
                                      523,  494,  485,  318,  246,  184,  179,  158,  100,  98,   71,   21};
  EXPECT_EQ(imbalance_ratio(rows_with_counts(published_counts)), "166:1");
  EXPECT_EQ(imbalance_ratio(rows_with_counts({5, 5, 5})), "1:1");
  EXPECT_EQ(imbalance_ratio(rows_with_counts({10, 3})), "3:1");
  try {
    imbalance_ratio({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyDistribution);
  }
}

TEST(Duplication, ZeroRemovalRow) {
  const auto t = duplication_summary({report("primevul", {3, 3, 3, 3})});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1].scope, "Total");
  for (const auto& s : t.rows[0].stages) EXPECT_EQ(removed_cell(s), "0 (0.00%)");
}

TEST(Duplication, CellsEqualIntegerOracle) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t initial = rng() % 400000;
    const std::size_t after = initial == 0 ? 0 : rng() % (initial + 1);
    ASSERT_EQ(removed_cell({initial, after}), oracle_removed_cell(initial, after)) << initial << " " << after;
  }
}

TEST(Duplication, PublishedRowsFromTheirIntegers) {
  // Rows whose every cell agrees with two-decimal rounding of its integers.
  const std::vector<DedupReport> rows{
      report("CleanVul", {43029, 43029, 43029, 43029}),     report("CVEfixes", {41829, 19247, 17743, 17249}),
      report("DiverseVul", {14484, 14476, 13974, 13964}),   report("PrimeVul", {4704, 4704, 4704, 4704}),
      report("SafeCoder", {1268, 1252, 1242, 1241}),        report("VulnPatchPairs", {11743, 11743, 11377, 11260}),
  };
  const auto md = duplication_summary(rows).to_markdown();
  for (const char* line : {
           "| CVEfixes | 41,829 | 19,247 | 22,582 (53.99%) | 19,247 | 17,743 | 1,504 (7.81%) | 17,743 | 17,249 | 494 (2.78%) |",
           "| DiverseVul | 14,484 | 14,476 | 8 (0.06%) | 14,476 | 13,974 | 502 (3.47%) | 13,974 | 13,964 | 10 (0.07%) |",
           "| SafeCoder | 1,268 | 1,252 | 16 (1.26%) | 1,252 | 1,242 | 10 (0.80%) | 1,242 | 1,241 | 1 (0.08%) |",
           "| VulnPatchPairs | 11,743 | 11,743 | 0 (0.00%) | 11,743 | 11,377 | 366 (3.12%) | 11,377 | 11,260 | 117 (1.03%) |",
       })
    EXPECT_NE(md.find(line), std::string::npos) << line << "\n" << md;
}

TEST(Duplication, TotalSumsDatasetRowsNotMerged) {
  const auto t = duplication_summary({report("a", {10, 8, 6, 5}), report("b", {4, 4, 3, 3}), report("merged", {8, 7, 7, 7})});
  ASSERT_EQ(t.rows.size(), 4u);
  const auto& total = t.rows.back();
  EXPECT_EQ(total.stages[0].initial, 14u);
  EXPECT_EQ(total.stages[0].remaining, 12u);
  EXPECT_EQ(total.stages[2].remaining, 8u);
  EXPECT_EQ(t.to_csv().substr(0, 8), "dataset,");
  EXPECT_NE(t.to_csv().find("\nTotal,14,12,2,14.29,12,9,3,25.00,9,8,1,11.11\n"), std::string::npos) << t.to_csv();
}

TEST(Duplication, TableFormatFlag) {
  EXPECT_EQ(parse_table_format("CSV"), TableFormat::csv);
  EXPECT_EQ(parse_table_format("md"), TableFormat::markdown);
  EXPECT_THROW(parse_table_format("xml"), Error);
}
