#include "vulnpipe/agents.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "vulnpipe/error.hpp"
#include "vulnpipe/parallel.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

std::optional<AssessmentFields> parse_assessment_block(std::string_view text) {
  AssessmentFields fields;
  bool inside = false;
  std::string* last = nullptr;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const auto raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    const auto line = trim(raw);
    if (!inside) {
      if (line == kBeginAssessment) inside = true;
      continue;
    }
    if (line == kEndAssessment) return fields;
    const auto colon = line.find(':');
    const auto key = colon == std::string_view::npos ? std::string_view{} : trim(line.substr(0, colon));
    const bool is_key = !key.empty() && std::all_of(key.begin(), key.end(), [](char c) {
      return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ' ';
    });
    if (is_key) {
      last = &(fields[to_upper(key)] = std::string(trim(line.substr(colon + 1))));
    } else if (last && !line.empty()) {
      if (!last->empty()) *last += '\n';
      *last += line;
    }
  }
  return std::nullopt;
}

std::optional<bool> parse_yes_no(std::string_view value) {
  const auto v = to_lower(trim(value));
  if (v == "yes" || v == "y" || v == "true") return true;
  if (v == "no" || v == "n" || v == "false") return false;
  return std::nullopt;
}

AssessmentFields ask_for_assessment(Gateway& gateway, const std::string& backend,
                                    const std::string& role, const std::string& prompt,
                                    const PromptSet& prompts, const FieldCheck& check,
                                    int attempts) {
  std::string problem;
  std::string current = prompt;
  for (int i = 1; i <= std::max(1, attempts); ++i) {
    AgentRequest request;
    request.role_id = role;
    request.backend_id = backend;
    request.prompt = current;
    const auto response = gateway.complete(std::move(request));
    if (auto fields = parse_assessment_block(response.text)) {
      if (auto issue = check(*fields); !issue) return *fields;
      else problem = *issue;
    } else {
      problem = "no " + std::string(kBeginAssessment) + " ... " + std::string(kEndAssessment) + " block";
    }
    current = prompt + prompts.render("reask", {{"problem", problem}});
  }
  throw Error(ErrorCode::ParseFailure, role + ": " + problem);
}

std::string_view to_string(AgentRole r) noexcept {
  switch (r) {
    case AgentRole::auditor: return "auditor";
    case AgentRole::critic: return "critic";
    case AgentRole::consensus: return "consensus";
    case AgentRole::relevance: return "relevance";
  }
  return "?";
}

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::security_fix: return "security_fix";
    case Verdict::not_security_fix: return "not_security_fix";
    case Verdict::undetermined: return "undetermined";
  }
  return "?";
}

std::optional<Verdict> parse_verdict(std::string_view value) {
  auto v = to_lower(trim(value));
  for (auto& c : v)
    if (c == ' ' || c == '-') c = '_';
  if (v == "security_fix") return Verdict::security_fix;
  if (v == "not_security_fix" || v == "not_a_security_fix") return Verdict::not_security_fix;
  if (v == "undetermined") return Verdict::undetermined;
  return std::nullopt;
}

Json to_json(const LoggedAssessment& e) {
  Json j;
  j["pair_id"] = e.pair_id;
  j["role"] = to_string(e.assessment.role);
  j["verdict"] = to_string(e.assessment.verdict);
  j["evidence"] = e.assessment.evidence;
  j["score"] = e.assessment.score ? Json(*e.assessment.score) : Json(nullptr);
  return j;
}

CurationAgents::CurationAgents(Gateway& gateway, CurationOptions options, PromptSet prompts)
    : gateway_(gateway), options_(std::move(options)), prompts_(std::move(prompts)) {
  if (!gateway_.has_backend(options_.backend))
    throw Error(ErrorCode::UnknownBackend, "no backend '" + options_.backend + "'");
}

std::map<std::string, std::string> CurationAgents::pair_vars(const FunctionPair& pair) {
  std::string context = "Language: " + pair.language + "\n";
  if (pair.cve) context += "CVE: " + *pair.cve + "\n";
  if (!pair.cwes.empty()) {
    std::vector<std::string> labels;
    for (const auto& c : pair.cwes) labels.push_back(c.str());
    context += "CWE: " + join(labels, ", ") + "\n";
  }
  if (pair.commit_message && !trim(*pair.commit_message).empty())
    context += "Commit message:\n" + *pair.commit_message + "\n";
  return {{"context", context}, {"diff", line_diff(pair.vuln_code, pair.fixed_code)}};
}

RelevanceDecision CurationAgents::relevance_filter(FunctionPair& pair) {
  if (pair.vuln_code.empty() || pair.fixed_code.empty())
    throw Error(ErrorCode::PreconditionViolation, "pair " + pair.id + " lacks code");
  const auto prompt = prompts_.render("relevance", pair_vars(pair));
  try {
    const auto f = ask_for_assessment(
        gateway_, options_.backend, "relevance", prompt, prompts_,
        [](const AssessmentFields& f) -> std::optional<std::string> {
          auto sec = f.find("SECURITY");
          if (sec == f.end() || !parse_yes_no(sec->second)) return "SECURITY must be yes or no";
          if (*parse_yes_no(sec->second)) {
            auto sc = f.find("SELF_CONTAINED");
            if (sc == f.end() || !parse_yes_no(sc->second)) return "SELF_CONTAINED must be yes or no";
          }
          return std::nullopt;
        },
        options_.parse_attempts);
    const bool keep = *parse_yes_no(f.at("SECURITY")) && *parse_yes_no(f.at("SELF_CONTAINED"));
    pair.tag(keep ? Status::filtered : Status::rejected);
    return keep ? RelevanceDecision::keep : RelevanceDecision::drop;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseFailure) throw;
    pair.tag(Status::unverifiable);
    return RelevanceDecision::drop;
  }
}

AgentAssessment CurationAgents::ask_verdict(AgentRole role, const std::string& prompt) {
  const auto f = ask_for_assessment(
      gateway_, options_.backend, std::string(to_string(role)), prompt, prompts_,
      [](const AssessmentFields& f) -> std::optional<std::string> {
        auto v = f.find("VERDICT");
        if (v == f.end() || !parse_verdict(v->second))
          return "VERDICT must be security_fix, not_security_fix or undetermined";
        auto e = f.find("EVIDENCE");
        if (e == f.end() || trim(e->second).empty()) return "EVIDENCE is required";
        return std::nullopt;
      },
      options_.parse_attempts);
  return {role, *parse_verdict(f.at("VERDICT")), f.at("EVIDENCE"), std::nullopt};
}

AgentAssessment CurationAgents::audit(const FunctionPair& pair) {
  return ask_verdict(AgentRole::auditor, prompts_.render("auditor", pair_vars(pair)));
}

AgentAssessment CurationAgents::critique(const FunctionPair& pair, const AgentAssessment& auditor) {
  if (auditor.role != AgentRole::auditor)
    throw Error(ErrorCode::PreconditionViolation, "critique needs an auditor assessment");
  auto vars = pair_vars(pair);
  vars["auditor_verdict"] = to_string(auditor.verdict);
  vars["auditor_evidence"] = auditor.evidence;
  return ask_verdict(AgentRole::critic, prompts_.render("critic", vars));
}

AgentAssessment CurationAgents::consensus(const FunctionPair& pair,
                                          const std::vector<AgentAssessment>& prior) {
  const AgentAssessment* auditor = nullptr;
  const AgentAssessment* critic = nullptr;
  int auditors = 0, critics = 0;
  for (const auto& a : prior) {
    if (a.role == AgentRole::auditor) auditor = &a, ++auditors;
    if (a.role == AgentRole::critic) critic = &a, ++critics;
  }
  if (auditors != 1 || critics != 1 || prior.size() != 2)
    throw Error(ErrorCode::PreconditionViolation,
                "consensus needs exactly one auditor and one critic assessment");
  auto vars = pair_vars(pair);
  vars["auditor_verdict"] = to_string(auditor->verdict);
  vars["auditor_evidence"] = auditor->evidence;
  vars["critic_verdict"] = to_string(critic->verdict);
  vars["critic_evidence"] = critic->evidence;

  auto parse_score = [](const std::string& s) -> std::optional<int> {
    const auto t = trim(s);
    int v = -1;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc{} || ptr != t.data() + t.size() || v < 0 || v > 3) return std::nullopt;
    return v;
  };
  const auto f = ask_for_assessment(
      gateway_, options_.backend, "consensus", prompts_.render("consensus", vars), prompts_,
      [&](const AssessmentFields& f) -> std::optional<std::string> {
        auto s = f.find("SCORE");
        if (s == f.end() || !parse_score(s->second)) return "SCORE must be an integer from 0 to 3";
        return std::nullopt;
      },
      options_.parse_attempts);
  AgentAssessment out;
  out.role = AgentRole::consensus;
  out.score = *parse_score(f.at("SCORE"));
  out.verdict = Verdict::undetermined;
  if (auto v = f.find("VERDICT"); v != f.end())
    if (auto parsed = parse_verdict(v->second)) out.verdict = *parsed;
  if (auto e = f.find("EVIDENCE"); e != f.end()) out.evidence = e->second;
  return out;
}

namespace {

bool is_budget(const Error& e) { return e.code() == ErrorCode::BudgetExceeded; }

}  // namespace

FilterResult filter_corpus(CurationAgents& agents, std::vector<FunctionPair> corpus, int workers) {
  std::vector<RelevanceDecision> decisions(corpus.size(), RelevanceDecision::drop);
  parallel_for_index(corpus.size(), workers, [&](std::size_t i) {
    try {
      decisions[i] = agents.relevance_filter(corpus[i]);
    } catch (const Error& e) {
      if (is_budget(e)) throw;
      corpus[i].tag(Status::unverifiable);
    }
  });
  FilterResult out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (decisions[i] == RelevanceDecision::keep ? out.kept : out.dropped).push_back(std::move(corpus[i]));
  return out;
}

VerifyResult verify_corpus(CurationAgents& agents, std::vector<FunctionPair> corpus, int threshold,
                           int workers) {
  if (threshold < 0 || threshold > 3)
    throw Error(ErrorCode::PreconditionViolation, "consensus threshold must be within 0..3");
  for (const auto& p : corpus)
    if (p.is_terminal())
      throw Error(ErrorCode::PreconditionViolation, "pair " + p.id + " was already rejected");

  struct PerPair {
    std::vector<AgentAssessment> assessments;
    std::optional<std::string> failure;
  };
  std::vector<PerPair> results(corpus.size());
  parallel_for_index(corpus.size(), workers, [&](std::size_t i) {
    auto& r = results[i];
    try {
      r.assessments.push_back(agents.audit(corpus[i]));
      r.assessments.push_back(agents.critique(corpus[i], r.assessments[0]));
      r.assessments.push_back(agents.consensus(corpus[i], r.assessments));
    } catch (const Error& e) {
      if (is_budget(e)) throw;
      r.failure = e.what();
    }
  });

  VerifyResult out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto& pair = corpus[i];
    auto& r = results[i];
    for (auto& a : r.assessments) out.log.push_back({pair.id, std::move(a)});
    if (r.failure) {
      pair.tag(Status::unverifiable);
      out.failures.push_back({pair.id, *r.failure});
      out.dropped.push_back(std::move(pair));
      continue;
    }
    const int score = *out.log.back().assessment.score;
    if (score >= threshold) {
      pair.tag(Status::verified);
      out.survivors.push_back(std::move(pair));
    } else {
      pair.tag(Status::rejected);
      out.dropped.push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace vulnpipe
