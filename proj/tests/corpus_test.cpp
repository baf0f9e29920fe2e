#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "vulnpipe/corpus.hpp"
#include "vulnpipe/error.hpp"

using namespace vulnpipe;
using vulnpipe::testing::oracle_normalize;

TEST(NormalizeCode, StripsAsciiWhitespace) {
  EXPECT_EQ(normalize_code("int f( ) {\n}"), "intf(){}");
  EXPECT_EQ(normalize_code(""), "");
  EXPECT_EQ(normalize_code("a\tb\r\n c"), "abc");
}

TEST(NormalizeCode, StripsUnicodeWhiteSpace) {
  // NBSP, ideographic space, line separator, NEL.
  EXPECT_EQ(normalize_code("a\xC2\xA0" "b\xE3\x80\x80" "c\xE2\x80\xA8" "d\xC2\x85" "e"), "abcde");
  // Zero-width space is not White_Space and must survive.
  EXPECT_EQ(normalize_code("a\xE2\x80\x8B" "b"), "a\xE2\x80\x8B" "b");
}

TEST(NormalizeCode, PreservesInvalidUtf8Bytes) {
  EXPECT_EQ(normalize_code("a \xFF b"), "a\xFF" "b");
}

TEST(NormalizeCode, IdempotentAndNeverLonger) {
  std::mt19937_64 rng(7);
  const std::string alphabet[] = {"a", " ", "\t", "\n", "{", "\xC2\xA0", "\xE2\x80\x83",
                                  "\xE4\xB8\xAD", "\xFF", "\r"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng() % 40);
    for (int i = 0; i < len; ++i) s += alphabet[rng() % std::size(alphabet)];
    const auto once = normalize_code(s);
    EXPECT_EQ(normalize_code(once), once);
    EXPECT_LE(once.size(), s.size());
    EXPECT_EQ(once, oracle_normalize(s)) << "input: " << s;
  }
}

TEST(DeriveId, GoldenValue) {
  // sha256(b"bigvul\0int f() { return 0; }\0int f() { return 1; }") via Python hashlib.
  EXPECT_EQ(derive_id("bigvul", "int f() { return 0; }", "int f() { return 1; }"),
            "82dc96446f916a74ffb1a61ceb9910adddadec3f77ae88491035da530dbe5002");
}

TEST(DeriveId, DeterministicAndSourceSensitive) {
  EXPECT_EQ(derive_id("a", "x", "y"), derive_id("a", "x", "y"));
  EXPECT_NE(derive_id("a", "x", "y"), derive_id("b", "x", "y"));
  // The separator keeps field boundaries distinct.
  EXPECT_NE(derive_id("a", "bx", "y"), derive_id("ab", "x", "y"));
}

TEST(DeriveId, RejectsEmptyCode) {
  try {
    derive_id("a", "", "y");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyCode);
  }
  EXPECT_THROW(derive_id("a", "x", ""), Error);
}

TEST(Fingerprint, IndentationInsensitive) {
  auto a = FunctionPair::make("s", "int f() {\n  return 0;\n}", "int f() { return 1; }");
  auto b = FunctionPair::make("t", "int f(){return 0;}", "int  f()\t{ return 1; }");
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_NE(a.id, b.id);
}

TEST(Fingerprint, SelfIdenticalSides) {
  auto p = FunctionPair::make("s", "x = 1;", "x=1;");
  const auto fp = fingerprint(p);
  EXPECT_EQ(fp.vuln_fp, fp.fixed_fp);
  EXPECT_EQ(to_hex(sha256("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Fingerprint, EqualityClassesMatchTextOracle) {
  auto corpus = vulnpipe::testing::random_corpus(42, 100);
  while (corpus.size() < 100) {
    auto more = vulnpipe::testing::random_corpus(corpus.size() + 1000, 100);
    corpus.insert(corpus.end(), more.begin(), more.end());
  }
  corpus.resize(100);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (std::size_t j = 0; j < corpus.size(); ++j) {
      const bool text_equal =
          oracle_normalize(corpus[i].vuln_code) == oracle_normalize(corpus[j].vuln_code) &&
          oracle_normalize(corpus[i].fixed_code) == oracle_normalize(corpus[j].fixed_code);
      EXPECT_EQ(fingerprint(corpus[i]) == fingerprint(corpus[j]), text_equal);
    }
  }
}

TEST(CweId, ParseAndRender) {
  EXPECT_EQ(CweId::parse("CWE-79").number(), 79);
  EXPECT_EQ(CweId::parse(" cwe-079 ").str(), "CWE-79");
  EXPECT_EQ(CweId::parse("787").str(), "CWE-787");
  for (int n : {1, 20, 798, 1321}) EXPECT_EQ(CweId::parse(CweId(n).str()), CweId(n));
  EXPECT_THROW(CweId::parse("NVD-CWE-noinfo"), Error);
  EXPECT_THROW(CweId::parse("CWE-0"), Error);
  EXPECT_THROW(CweId::parse("CWE-"), Error);
  EXPECT_THROW(CweId(0), Error);
}

TEST(FunctionPair, JsonRoundTripPreservesUnknownFields) {
  auto p = FunctionPair::make("bigvul", "a();", "b();");
  p.cve = "CVE-2020-0001";
  p.cwes = {CweId(79), CweId(89)};
  p.language = "c";
  p.commit_message = "fix xss";
  p.tag(Status::ingested);
  p.tag(Status::reconciled);
  p.extra["project"] = "linux";
  p.extra["nested"] = {{"k", 1}};

  const auto line = to_json(p).dump();
  const auto q = pair_from_json(Json::parse(line));
  EXPECT_EQ(to_json(q).dump(), line);
  EXPECT_EQ(q.extra["project"], "linux");
  EXPECT_EQ(q.status, p.status);
}

TEST(FunctionPair, RejectsTamperedId) {
  auto j = to_json(FunctionPair::make("s", "a", "b"));
  j["id"] = std::string(64, '0');
  EXPECT_THROW(pair_from_json(j), Error);
}

TEST(FunctionPair, SynthesizedMustNotCarryCve) {
  auto p = FunctionPair::make("rvg", "a", "b", Provenance::synthesized);
  p.cve = "CVE-2020-0001";
  EXPECT_THROW(p.validate(), Error);
}

TEST(FunctionPair, TerminalStatusBlocksFurtherTags) {
  auto p = FunctionPair::make("s", "a", "b");
  p.tag(Status::ingested);
  p.tag(Status::rejected);
  EXPECT_THROW(p.tag(Status::verified), Error);
  EXPECT_NO_THROW(p.tag(Status::unverifiable));
}

TEST(FunctionPair, JsonlFileRoundTrip) {
  const auto dir = vulnpipe::testing::temp_dir("corpus");
  std::vector<FunctionPair> pairs{vulnpipe::testing::pair("a", "x\n", "y", {79}),
                                  vulnpipe::testing::pair("b", "z", "w\xE4\xB8\xAD", {})};
  write_jsonl(dir / "c.jsonl", pairs);
  const auto back = read_jsonl(dir / "c.jsonl");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(to_json(back[i]), to_json(pairs[i]));
  EXPECT_EQ(fingerprint_set_digest(back), fingerprint_set_digest({pairs[1], pairs[0]}));
}
