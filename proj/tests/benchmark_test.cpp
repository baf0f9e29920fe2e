#include <gtest/gtest.h>

#include <random>
#include <set>

#include "test_support.hpp"
#include "vulnpipe/benchmark.hpp"
#include "vulnpipe/error.hpp"

using namespace vulnpipe;
using namespace vulnpipe::testing;

namespace {

std::vector<FunctionPair> make(int count, int cwe, Provenance prov, const std::string& tag) {
  std::vector<FunctionPair> out;
  for (int i = 0; i < count; ++i) {
    auto p = FunctionPair::make(prov == Provenance::real ? "bigvul" : "rvg",
                                tag + "v" + std::to_string(i) + "_" + std::to_string(cwe),
                                tag + "f" + std::to_string(i) + "_" + std::to_string(cwe), prov);
    p.cwes = {CweId(cwe)};
    p.language = "c";
    p.tag(Status::verified);
    out.push_back(std::move(p));
  }
  return out;
}

void append(std::vector<FunctionPair>& a, const std::vector<FunctionPair>& b) { a.insert(a.end(), b.begin(), b.end()); }

std::size_t count_provenance(const std::vector<FunctionPair>& v, int cwe, Provenance p) {
  return std::count_if(v.begin(), v.end(), [&](const FunctionPair& x) {
    return x.primary_cwe() == CweId(cwe) && x.provenance == p;
  });
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvariantViolation;
}

}  // namespace

TEST(Assemble, RealFirstThenSyntheticFill) {
  std::vector<FunctionPair> real, synth;
  append(real, make(60, 79, Provenance::real, "r"));
  append(real, make(30, 89, Provenance::real, "r"));
  append(synth, make(25, 89, Provenance::synthesized, "s"));
  append(synth, make(5, 79, Provenance::synthesized, "s"));
  const auto b = assemble(real, synth, {CweId(79), CweId(89)}, 50);
  ASSERT_EQ(b.size(), 100u);
  EXPECT_EQ(count_provenance(b, 79, Provenance::real), 50u);
  EXPECT_EQ(count_provenance(b, 79, Provenance::synthesized), 0u);
  EXPECT_EQ(count_provenance(b, 89, Provenance::real), 30u);
  EXPECT_EQ(count_provenance(b, 89, Provenance::synthesized), 20u);
  // Stable order: the first 50 real CWE-79 pairs in input order.
  EXPECT_EQ(b[0].id, real[0].id);
  EXPECT_EQ(b[49].id, real[49].id);
  for (const auto& p : b) EXPECT_TRUE(p.has(Status::benchmark));
}

TEST(Assemble, ListsEveryShortfall) {
  std::vector<FunctionPair> real, synth;
  append(real, make(30, 89, Provenance::real, "r"));
  append(synth, make(10, 89, Provenance::synthesized, "s"));
  append(real, make(49, 79, Provenance::real, "r"));
  try {
    assemble(real, synth, {CweId(79), CweId(89), CweId(22)}, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSamples);
    const std::string m = e.what();
    EXPECT_NE(m.find("CWE-89 short by 10"), std::string::npos) << m;
    EXPECT_NE(m.find("CWE-79 short by 1"), std::string::npos) << m;
    EXPECT_NE(m.find("CWE-22 short by 50"), std::string::npos) << m;
  }
  const auto plan = QuotaPlan::compute(real, synth, {CweId(89)}, 50);
  EXPECT_EQ(plan.entries[0].synth_needed, 20u);
  EXPECT_EQ(plan.entries[0].shortfall(), 10u);
}

TEST(Assemble, MatchesOnPrimaryLabelOnly) {
  auto real = make(50, 79, Provenance::real, "r");
  for (auto& p : real) p.cwes.push_back(CweId(89));
  EXPECT_EQ(code_of([&] { assemble(real, {}, {CweId(79), CweId(89)}, 50); }), ErrorCode::InsufficientSamples);
  EXPECT_EQ(assemble(real, {}, {CweId(79)}, 50).size(), 50u);
}

TEST(Assemble, Preconditions) {
  auto real = make(2, 79, Provenance::real, "r");
  auto unverified = pair("bigvul", "a", "b", {79});
  EXPECT_EQ(code_of([&] { assemble({unverified}, {}, {CweId(79)}, 1); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([&] { assemble(real, {}, {}, 1); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([&] { assemble({}, real, {CweId(79)}, 1); }), ErrorCode::PreconditionViolation);
  auto reviewed = pair("bigvul", "a", "b", {79});
  reviewed.tag(Status::reviewed);
  EXPECT_EQ(assemble({reviewed}, {}, {CweId(79)}, 1).size(), 1u);
}

TEST(Assemble, ManifestCountsAndDigest) {
  std::vector<FunctionPair> real = make(3, 79, Provenance::real, "r");
  auto synth = make(2, 79, Provenance::synthesized, "s");
  const auto b = assemble(real, synth, {CweId(79)}, 5);
  const auto m = benchmark_manifest(b, {CweId(79)}, 5);
  EXPECT_EQ(m["per_cwe"]["CWE-79"]["real"], 3);
  EXPECT_EQ(m["per_cwe"]["CWE-79"]["synthesized"], 2);
  EXPECT_EQ(m["fingerprint_digest"], fingerprint_set_digest(b));
}

TEST(Leakage, DisjointInjectedAndProperty) {
  std::vector<FunctionPair> bench{pair("b", "x()", "y()"), pair("b", "p()", "q()")};
  std::vector<FunctionPair> train{pair("t", "m()", "n()")};
  EXPECT_TRUE(leakage_check(bench, train).empty());
  train.push_back(pair("t", "p ( )", "q\t()"));
  const auto leaks = leakage_check(bench, train);
  ASSERT_EQ(leaks.size(), 1u);
  EXPECT_EQ(leaks[0], std::make_pair(bench[1].id, train[1].id));
  EXPECT_EQ(ids(remove_leakage(train, bench)), std::vector<std::string>{train[0].id});

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto b = random_corpus(seed, 40, "bench");
    const auto t = random_corpus(seed + 1000, 60, "train");
    ASSERT_EQ(leakage_check(b, t), oracle_leaks(b, t)) << seed;
    const auto cleaned = remove_leakage(t, b);
    EXPECT_TRUE(leakage_check(b, cleaned).empty());
    std::set<std::string> leaked;
    for (const auto& [_, tid] : oracle_leaks(b, t)) leaked.insert(tid);
    EXPECT_EQ(cleaned.size(), t.size() - leaked.size());
  }
}

TEST(Apportion, StatedRoundingRule) {
  EXPECT_EQ(apportion(100, kDefaultRatios), (std::array<std::size_t, 3>{70, 15, 15}));
  EXPECT_EQ(apportion(10, kDefaultRatios), (std::array<std::size_t, 3>{7, 2, 1}));
  EXPECT_EQ(apportion(0, kDefaultRatios), (std::array<std::size_t, 3>{0, 0, 0}));
  EXPECT_EQ(apportion(1, kDefaultRatios), (std::array<std::size_t, 3>{1, 0, 0}));
}

TEST(Apportion, MatchesIntegerOracle) {
  // 70/15/15 in integer hundredths: floors and remainders are exact.
  for (std::size_t n = 0; n <= 2000; ++n) {
    const std::array<std::size_t, 3> w{70, 15, 15};
    std::array<std::size_t, 3> c{}, rem{};
    std::size_t used = 0;
    for (int k = 0; k < 3; ++k) {
      c[k] = n * w[k] / 100;
      rem[k] = n * w[k] % 100;
      used += c[k];
    }
    while (used < n) {
      int best = 0;
      for (int k = 1; k < 3; ++k)
        if (rem[k] > rem[best]) best = k;
      ++c[best];
      rem[best] = 0;
      ++used;
    }
    ASSERT_EQ(apportion(n, kDefaultRatios), c) << n;
  }
}

TEST(Split, PartitionDeterminismAndStrata) {
  std::vector<FunctionPair> corpus;
  for (int cwe : {79, 89, 787})
    append(corpus, make(cwe == 787 ? 10 : 100 + cwe, cwe, Provenance::real, "r"));
  for (int i = 0; i < 7; ++i) corpus.push_back(pair("x", "u" + std::to_string(i), "w"));

  const auto s = split_export(corpus, kDefaultRatios, 42);
  std::multiset<std::string> all;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (const auto& p : *part) all.insert(p.id);
  const auto expected = ids(corpus);
  EXPECT_EQ(all, std::multiset<std::string>(expected.begin(), expected.end()));
  EXPECT_EQ(std::set<std::string>(all.begin(), all.end()).size(), corpus.size());

  std::map<std::string, std::array<std::size_t, 3>> per;
  for (int k = 0; k < 3; ++k)
    for (const auto& p : (k == 0 ? s.train : k == 1 ? s.validation : s.test)) ++per[p.primary_cwe_key()][k];
  EXPECT_EQ(per["CWE-787"], (std::array<std::size_t, 3>{7, 2, 1}));
  for (const auto& [key, counts] : per) {
    const double n = static_cast<double>(counts[0] + counts[1] + counts[2]);
    for (int k = 0; k < 3; ++k) EXPECT_LT(std::abs(static_cast<double>(counts[k]) - n * kDefaultRatios[k]), 1.0) << key;
  }

  const auto again = split_export(corpus, kDefaultRatios, 42);
  EXPECT_EQ(ids(again.train), ids(s.train));
  EXPECT_EQ(ids(again.test), ids(s.test));
  const auto other = split_export(corpus, kDefaultRatios, 43);
  EXPECT_NE(ids(other.train), ids(s.train));

  const auto m = split_manifest(s, kDefaultRatios, 42);
  EXPECT_EQ(m["per_cwe"]["CWE-787"]["validation"], 2);
  EXPECT_EQ(m["splits"]["train"]["count"], s.train.size());
}

TEST(Split, BadRatios) {
  EXPECT_EQ(code_of([] { split_export({}, {0.7, 0.2, 0.2}, 0); }), ErrorCode::BadRatios);
  EXPECT_EQ(code_of([] { split_export({}, {1.2, -0.1, -0.1}, 0); }), ErrorCode::BadRatios);
  EXPECT_NO_THROW(split_export({}, {0.8, 0.1, 0.1}, 0));
}
