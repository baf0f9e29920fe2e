#pragma once

// Realistic vulnerability generation: a context modeler proposes a scenario,
// an implementer writes vulnerable code for it, a security auditor repairs it,
// a reviewer checks the repair, and a second backend cross-validates the pair.

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "vulnpipe/corpus.hpp"
#include "vulnpipe/llm.hpp"
#include "vulnpipe/prompts.hpp"

namespace vulnpipe {

struct ScenarioContext {
  CweId cwe;
  std::string language;
  std::string tech_stack;
  std::vector<std::string> user_roles;
  std::string functionality;
  std::string attack_vector;

  using UniquenessKey = std::tuple<std::string, std::string, std::string>;
  UniquenessKey key() const { return {language, tech_stack, functionality}; }
};

Json to_json(const ScenarioContext& c);

enum class ReviewDecision { approved, rejected };

struct SynthesisOutcome {
  std::optional<ScenarioContext> context;  // absent when no unique context could be modeled
  std::optional<FunctionPair> pair;
  int attempts = 0;
  std::optional<std::string> failure_reason;
};

struct RvgOptions {
  std::string synth_backend;
  std::size_t fifo_window = 50;
  int context_attempts = 3;
  int sample_attempts = 3;
  int parse_attempts = 3;
};

/// Contents of the first fenced code block, or nullopt.
std::optional<std::string> first_code_block(std::string_view text);

class RvgSynthesizer {
 public:
  RvgSynthesizer(Gateway& gateway, RvgOptions options, PromptSet prompts = PromptSet::defaults());

  /// `history` is the full run history; only the last `fifo_window` entries go
  /// into the prompt, but uniqueness is checked against all of them.
  ScenarioContext model_context(CweId cwe, const std::vector<ScenarioContext>& history);
  std::string implement_vulnerable(const ScenarioContext& context);
  std::string audit_and_fix(const std::string& vuln_code, const ScenarioContext& context);
  ReviewDecision review_remediation(const std::string& vuln, const std::string& fixed, CweId cwe);
  ReviewDecision cross_validate(const FunctionPair& pair, const std::string& validator_backend);

  /// Exactly `n` outcomes; BudgetExceeded aborts, other failures are recorded per outcome.
  std::vector<SynthesisOutcome> synthesize(CweId cwe, std::size_t n, const std::string& validator_backend);

  const RvgOptions& options() const { return options_; }

 private:
  std::string ask_for_code(const std::string& role, const std::string& prompt);
  ReviewDecision ask_present_mitigated(const std::string& role, const std::string& backend,
                                       const std::string& prompt);

  Gateway& gateway_;
  RvgOptions options_;
  PromptSet prompts_;
};

/// Generates `n` samples for each CWE; distinct CWEs run concurrently with
/// independent histories. Results follow the order of `cwes`.
std::vector<std::pair<CweId, std::vector<SynthesisOutcome>>> synthesize_all(
    RvgSynthesizer& synth, const std::vector<CweId>& cwes, std::size_t n,
    const std::string& validator_backend, int workers = 1);

struct SynthesisReportRow {
  CweId cwe;
  std::size_t requested = 0;
  std::size_t accepted = 0;
  std::size_t failed = 0;
  double mean_attempts = 0;
};

SynthesisReportRow summarize(CweId cwe, const std::vector<SynthesisOutcome>& outcomes);
/// Columns: cwe, requested, accepted, failed, mean_attempts.
std::string synthesis_report_csv(const std::vector<SynthesisReportRow>& rows);

}  // namespace vulnpipe
