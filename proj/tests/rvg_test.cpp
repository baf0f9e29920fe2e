#include <gtest/gtest.h>

#include "vulnpipe/agents.hpp"
#include "vulnpipe/error.hpp"
#include "vulnpipe/rvg.hpp"

using namespace vulnpipe;

namespace {

std::string block(const std::string& body) {
  return "===BEGIN_ASSESSMENT===\n" + body + "\n===END_ASSESSMENT===";
}

std::string scenario(const std::string& lang, const std::string& stack, const std::string& func) {
  return block("LANGUAGE: " + lang + "\nTECH_STACK: " + stack +
               "\nUSER_ROLES: admin, guest\nFUNCTIONALITY: " + func +
               "\nATTACK_VECTOR: crafted request");
}

std::string fenced(const std::string& code) { return "Here you go:\n```python\n" + code + "\n```\n"; }

struct Rig {
  Gateway gateway;
  ScriptedBackend* synth;
  ScriptedBackend* validator;
  RvgSynthesizer rvg;

  Rig() : gateway(options()), synth(add(gateway, "synth")), validator(add(gateway, "check")),
          rvg(gateway, {"synth"}) {}

  static GatewayOptions options() {
    GatewayOptions o;
    o.backoff = std::chrono::milliseconds(0);
    return o;
  }
  static ScriptedBackend* add(Gateway& g, const std::string& id) {
    auto b = std::make_unique<ScriptedBackend>(id);
    auto* raw = b.get();
    g.register_backend(std::move(b));
    return raw;
  }

  std::size_t calls(const std::string& role) const {
    std::size_t n = 0;
    for (const auto& t : gateway.transcript()) n += t["role_id"] == role;
    return n;
  }

  // Every scenario in `funcs` gets its own implementation; remediation and reviews approve.
  void script_approving(const std::vector<std::string>& funcs) {
    for (const auto& f : funcs) {
      synth->add_any("context_modeler", scenario("Python", "Flask", f));
      synth->add_contains("implementer", "Functionality: " + f + "\n",
                          fenced("def " + f + "():\n    return 'hunter2'"));
      synth->add_contains("security_auditor", "def " + f + "()",
                          fenced("def " + f + "():\n    return os.environ['SECRET']"));
    }
    synth->add_any("security_reviewer", block("PRESENT: yes\nMITIGATED: yes"));
    validator->add_any("cross_validator", block("PRESENT: yes\nMITIGATED: yes"));
  }
};

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvariantViolation;
}

ScenarioContext ctx(const std::string& lang, const std::string& stack, const std::string& func) {
  return {CweId(798), lang, stack, {"admin"}, func, "network"};
}

}  // namespace

TEST(CodeBlock, FirstFenceWins) {
  EXPECT_EQ(first_code_block("x\n```c\nint a;\n```\n"), "int a;");
  EXPECT_EQ(first_code_block("```\none\n```\n```\ntwo\n```"), "one");
  EXPECT_EQ(first_code_block("```\n```"), "");
  EXPECT_FALSE(first_code_block("no code"));
  EXPECT_FALSE(first_code_block("```c\nunterminated"));
}

TEST(ModelContext, EmptyHistoryAcceptsAnyContext) {
  Rig rig;
  rig.synth->add_any("context_modeler", scenario("Go", "gin", "login"));
  const auto c = rig.rvg.model_context(CweId(798), {});
  EXPECT_EQ(c.language, "Go");
  EXPECT_EQ(c.user_roles, (std::vector<std::string>{"admin", "guest"}));
  EXPECT_EQ(c.cwe, CweId(798));
}

TEST(ModelContext, RegeneratesOnCollision) {
  Rig rig;
  rig.synth->add_any("context_modeler", scenario("Go", "gin", "login"));
  rig.synth->add_any("context_modeler", scenario("Go", "gin", "login"));
  rig.synth->add_any("context_modeler", scenario("Rust", "axum", "upload"));
  const auto c = rig.rvg.model_context(CweId(798), {ctx("Go", "gin", "login")});
  EXPECT_EQ(c.language, "Rust");
  EXPECT_EQ(rig.calls("context_modeler"), 3u);
  const auto t = rig.gateway.transcript();
  EXPECT_NE(t[1]["prompt"].get<std::string>().find("already been used"), std::string::npos);
}

TEST(ModelContext, StuckOnDuplicateIsExhausted) {
  Rig rig;
  rig.synth->add_any("context_modeler", scenario("Go", "gin", "login"));
  EXPECT_EQ(code_of([&] { rig.rvg.model_context(CweId(798), {ctx("Go", "gin", "login")}); }),
            ErrorCode::UniquenessExhausted);
  EXPECT_EQ(rig.calls("context_modeler"), 3u);
}

TEST(ModelContext, PromptShowsOnlyFifoWindowButChecksFullHistory) {
  Rig rig;
  std::vector<ScenarioContext> history;
  for (int i = 0; i < 60; ++i) history.push_back(ctx("C", "posix", "feature" + std::to_string(i) + "x"));
  // Outside the window, yet still a collision.
  rig.synth->add_any("context_modeler", scenario("C", "posix", "feature0x"));
  rig.synth->add_any("context_modeler", scenario("C", "posix", "brand new"));
  const auto c = rig.rvg.model_context(CweId(798), history);
  EXPECT_EQ(c.functionality, "brand new");
  const auto prompt = rig.gateway.transcript()[0]["prompt"].get<std::string>();
  EXPECT_EQ(prompt.find("feature9x"), std::string::npos);
  EXPECT_NE(prompt.find("feature10x"), std::string::npos);
  EXPECT_NE(prompt.find("feature59x"), std::string::npos);
}

TEST(Implement, ExtractsCodeOrFails) {
  Rig rig;
  rig.synth->add_contains("implementer", "login", fenced("a = 1") + fenced("b = 2"));
  rig.synth->add_contains("implementer", "upload", "Sorry, no code.");
  EXPECT_EQ(rig.rvg.implement_vulnerable(ctx("Python", "Django", "login")), "a = 1");
  EXPECT_EQ(code_of([&] { rig.rvg.implement_vulnerable(ctx("Python", "Django", "upload")); }),
            ErrorCode::ParseFailure);
}

TEST(AuditAndFix, VerbatimIdenticalAndMissing) {
  Rig rig;
  rig.synth->add_contains("security_auditor", "ok_input", fenced("safe()"));
  rig.synth->add_contains("security_auditor", "same_input", fenced("same_input()"));
  rig.synth->add_contains("security_auditor", "bad_input", "I refuse.");
  const auto c = ctx("Python", "Django", "login");
  EXPECT_EQ(rig.rvg.audit_and_fix("ok_input()", c), "safe()");
  EXPECT_EQ(code_of([&] { rig.rvg.audit_and_fix("same_input()", c); }), ErrorCode::RemediationIdentical);
  EXPECT_EQ(code_of([&] { rig.rvg.audit_and_fix("bad_input()", c); }), ErrorCode::ParseFailure);
}

TEST(Review, ApprovedRejectedAndUnparseable) {
  Rig rig;
  rig.synth->add_contains("security_reviewer", "v1", block("PRESENT: yes\nMITIGATED: yes"));
  rig.synth->add_contains("security_reviewer", "v2", block("MITIGATED: no"));
  rig.synth->add_contains("security_reviewer", "v3", "looks fine to me");
  EXPECT_EQ(rig.rvg.review_remediation("v1", "f", CweId(798)), ReviewDecision::approved);
  EXPECT_EQ(rig.rvg.review_remediation("v2", "f", CweId(798)), ReviewDecision::rejected);
  EXPECT_EQ(rig.rvg.review_remediation("v3", "f", CweId(798)), ReviewDecision::rejected);
}

TEST(CrossValidate, UsesDistinctBackend) {
  Rig rig;
  auto p = FunctionPair::make("rvg", "bad()", "good()", Provenance::synthesized);
  p.cwes = {CweId(798)};
  p.language = "python";
  rig.validator->add_any("cross_validator", block("PRESENT: yes\nMITIGATED: yes"));
  rig.validator->add_any("cross_validator", block("PRESENT: yes\nMITIGATED: no"));
  EXPECT_EQ(rig.rvg.cross_validate(p, "check"), ReviewDecision::approved);
  EXPECT_EQ(rig.rvg.cross_validate(p, "check"), ReviewDecision::rejected);
  EXPECT_EQ(rig.gateway.transcript().back()["backend_id"], "check");
  EXPECT_EQ(code_of([&] { rig.rvg.cross_validate(p, "synth"); }), ErrorCode::SameBackend);
}

TEST(Synthesize, AllApproveProducesDistinctPairs) {
  Rig rig;
  rig.script_approving({"login", "reset_password"});
  const auto out = rig.rvg.synthesize(CweId(798), 2, "check");
  ASSERT_EQ(out.size(), 2u);
  std::set<ScenarioContext::UniquenessKey> keys;
  for (const auto& o : out) {
    ASSERT_TRUE(o.pair);
    EXPECT_FALSE(o.failure_reason);
    EXPECT_EQ(o.attempts, 1);
    EXPECT_EQ(o.pair->cwes, std::vector<CweId>{CweId(798)});
    EXPECT_EQ(o.pair->provenance, Provenance::synthesized);
    EXPECT_EQ(o.pair->source, "rvg");
    EXPECT_FALSE(o.pair->cve);
    EXPECT_EQ(o.pair->language, "python");
    EXPECT_TRUE(o.pair->commit_message);
    EXPECT_TRUE(o.pair->has(Status::verified));
    EXPECT_NE(normalize_code(o.pair->vuln_code), normalize_code(o.pair->fixed_code));
    EXPECT_NO_THROW(o.pair->validate());
    keys.insert(o.context->key());
  }
  EXPECT_EQ(keys.size(), 2u);
}

TEST(Synthesize, RejectedFirstAttemptThenApproved) {
  Rig rig;
  rig.validator->add_any("cross_validator", block("PRESENT: yes\nMITIGATED: no"));
  rig.script_approving({"login", "export"});
  const auto out = rig.rvg.synthesize(CweId(798), 1, "check");
  ASSERT_EQ(out.size(), 1u);
  ASSERT_TRUE(out[0].pair);
  EXPECT_EQ(out[0].attempts, 2);
  EXPECT_EQ(out[0].context->functionality, "export");
}

TEST(Synthesize, AlwaysRejectingGivesFailureOutcomes) {
  Rig fresh;
  fresh.synth->add_any("security_reviewer", block("PRESENT: yes\nMITIGATED: no"));
  for (const auto& f : {"a1", "a2", "a3", "a4", "a5", "a6"}) {
    fresh.synth->add_any("context_modeler", scenario("Python", "Flask", f));
    fresh.synth->add_any("implementer", fenced("x = 1"));
    fresh.synth->add_any("security_auditor", fenced("x = 2"));
  }
  const auto out = fresh.rvg.synthesize(CweId(798), 2, "check");
  ASSERT_EQ(out.size(), 2u);
  for (const auto& o : out) {
    EXPECT_FALSE(o.pair);
    ASSERT_TRUE(o.failure_reason);
    EXPECT_EQ(o.attempts, 3);
  }
  const auto row = summarize(CweId(798), out);
  EXPECT_EQ(synthesis_report_csv({row}), "cwe,requested,accepted,failed,mean_attempts\nCWE-798,2,0,2,3.00\n");
}

TEST(Synthesize, WhitespaceOnlyRemediationIsAFailedAttempt) {
  Rig rig;
  rig.synth->add_any("context_modeler", scenario("C", "libc", "copy"));
  rig.synth->add_any("context_modeler", scenario("C", "libc", "copy2"));
  rig.synth->add_any("context_modeler", scenario("C", "libc", "copy3"));
  rig.synth->add_any("implementer", fenced("f(a,b);"));
  rig.synth->add_any("security_auditor", fenced("f(a, b);"));
  rig.synth->add_any("security_reviewer", block("PRESENT: yes\nMITIGATED: yes"));
  const auto out = rig.rvg.synthesize(CweId(120), 1, "check");
  EXPECT_FALSE(out[0].pair);
  EXPECT_EQ(out[0].attempts, 3);
  EXPECT_NE(out[0].failure_reason->find("whitespace"), std::string::npos);
  EXPECT_EQ(rig.calls("security_reviewer"), 0u);
}

TEST(Synthesize, PreconditionsAndDeterminism) {
  Rig rig;
  EXPECT_EQ(code_of([&] { rig.rvg.synthesize(CweId(798), 0, "check"); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([&] { rig.rvg.synthesize(CweId(798), 1, "synth"); }), ErrorCode::SameBackend);

  std::vector<std::string> dumps;
  for (int run = 0; run < 2; ++run) {
    Rig r;
    r.script_approving({"login", "reset", "audit_log"});
    std::string dump;
    for (const auto& o : r.rvg.synthesize(CweId(798), 3, "check")) dump += to_json(*o.pair).dump() + "\n";
    dumps.push_back(dump);
  }
  EXPECT_EQ(dumps[0], dumps[1]);
}

TEST(Synthesize, ManyCwesKeepOrder) {
  Rig rig;
  for (const auto& [cwe, f] : {std::pair{"CWE-79", "comment"}, std::pair{"CWE-89", "search"}}) {
    rig.synth->add_contains("context_modeler", std::string("introduce ") + cwe + ".",
                            scenario("PHP", "Laravel", f));
    rig.synth->add_contains("implementer", std::string("Functionality: ") + f + "\n", fenced(std::string("q_") + f + "()"));
    rig.synth->add_contains("security_auditor", std::string("q_") + f, fenced(std::string("safe_") + f + "()"));
  }
  rig.synth->add_any("security_reviewer", block("PRESENT: yes\nMITIGATED: yes"));
  rig.validator->add_any("cross_validator", block("PRESENT: yes\nMITIGATED: yes"));
  const auto all = synthesize_all(rig.rvg, {CweId(79), CweId(89)}, 1, "check", 2);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].first, CweId(79));
  ASSERT_TRUE(all[0].second[0].pair);
  EXPECT_EQ(all[0].second[0].pair->vuln_code, "q_comment()");
  EXPECT_EQ(all[1].second[0].pair->vuln_code, "q_search()");
}
