#pragma once

// Relevance filtering and Auditor -> Critic -> Consensus verification of
// mined function pairs, plus the structured-output parsing shared with the
// synthesis workflow.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vulnpipe/corpus.hpp"
#include "vulnpipe/llm.hpp"
#include "vulnpipe/prompts.hpp"

namespace vulnpipe {

inline constexpr std::string_view kBeginAssessment = "===BEGIN_ASSESSMENT===";
inline constexpr std::string_view kEndAssessment = "===END_ASSESSMENT===";

/// Upper-cased KEY -> trimmed value from the first sentinel-delimited block.
using AssessmentFields = std::map<std::string, std::string>;

/// Nullopt when no complete block is present. Lines without a colon continue
/// the previous value.
std::optional<AssessmentFields> parse_assessment_block(std::string_view text);
std::optional<bool> parse_yes_no(std::string_view value);

/// Returns a problem description, or nullopt when the fields are acceptable.
using FieldCheck = std::function<std::optional<std::string>(const AssessmentFields&)>;

/// Sends `prompt` and re-asks (appending the "reask" template) until the reply
/// holds a block that passes `check`, up to `attempts` replies in total.
/// Throws ParseFailure when every reply fails; gateway errors propagate.
AssessmentFields ask_for_assessment(Gateway& gateway, const std::string& backend,
                                    const std::string& role, const std::string& prompt,
                                    const PromptSet& prompts, const FieldCheck& check,
                                    int attempts = 3);

enum class AgentRole { auditor, critic, consensus, relevance };
enum class Verdict { security_fix, not_security_fix, undetermined };

std::string_view to_string(AgentRole r) noexcept;
std::string_view to_string(Verdict v) noexcept;
std::optional<Verdict> parse_verdict(std::string_view value);

struct AgentAssessment {
  AgentRole role = AgentRole::auditor;
  Verdict verdict = Verdict::undetermined;
  std::string evidence;
  std::optional<int> score;  // consensus only, 0..3
};

struct LoggedAssessment {
  std::string pair_id;
  AgentAssessment assessment;
};

Json to_json(const LoggedAssessment& entry);

enum class RelevanceDecision { keep, drop };

struct CurationOptions {
  std::string backend;
  int parse_attempts = 3;
};

class CurationAgents {
 public:
  CurationAgents(Gateway& gateway, CurationOptions options, PromptSet prompts = PromptSet::defaults());

  /// Tags the pair `filtered` (keep), `rejected` (drop) or `unverifiable`
  /// (no parseable answer; also a drop).
  RelevanceDecision relevance_filter(FunctionPair& pair);

  AgentAssessment audit(const FunctionPair& pair);
  AgentAssessment critique(const FunctionPair& pair, const AgentAssessment& auditor);
  AgentAssessment consensus(const FunctionPair& pair, const std::vector<AgentAssessment>& prior);

  /// Variables shared by every curation prompt for this pair.
  static std::map<std::string, std::string> pair_vars(const FunctionPair& pair);

 private:
  AgentAssessment ask_verdict(AgentRole role, const std::string& prompt);

  Gateway& gateway_;
  CurationOptions options_;
  PromptSet prompts_;
};

struct FilterResult {
  std::vector<FunctionPair> kept;
  std::vector<FunctionPair> dropped;
};

/// Applies the relevance filter to every pair. Output order follows input
/// order regardless of `workers`. Only BudgetExceeded aborts the run.
FilterResult filter_corpus(CurationAgents& agents, std::vector<FunctionPair> corpus, int workers = 1);

struct VerifyFailure {
  std::string pair_id;
  std::string reason;
};

struct VerifyResult {
  std::vector<FunctionPair> survivors;  // tagged verified
  std::vector<FunctionPair> dropped;    // tagged rejected or unverifiable
  std::vector<LoggedAssessment> log;    // corpus order, then auditor, critic, consensus
  std::vector<VerifyFailure> failures;  // pairs left unverifiable, with the cause
};

/// Runs audit -> critique -> consensus for each pair and keeps those whose
/// consensus score is at least `threshold` (0..3). Per-pair errors make that
/// pair unverifiable; BudgetExceeded aborts the whole run.
VerifyResult verify_corpus(CurationAgents& agents, std::vector<FunctionPair> corpus,
                           int threshold = 2, int workers = 1);

}  // namespace vulnpipe
