#include "vulnpipe/rvg.hpp"

#include <set>
#include <sstream>

#include "vulnpipe/agents.hpp"
#include "vulnpipe/error.hpp"
#include "vulnpipe/parallel.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

Json to_json(const ScenarioContext& c) {
  return {{"cwe", c.cwe.str()},
          {"language", c.language},
          {"tech_stack", c.tech_stack},
          {"user_roles", c.user_roles},
          {"functionality", c.functionality},
          {"attack_vector", c.attack_vector}};
}

std::optional<std::string> first_code_block(std::string_view text) {
  const auto open = text.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  const auto body = text.find('\n', open);
  if (body == std::string_view::npos) return std::nullopt;
  const auto close = text.find("\n```", body);
  if (close == std::string_view::npos) return std::nullopt;
  if (close == body) return std::string();
  return std::string(text.substr(body + 1, close - body - 1));
}

RvgSynthesizer::RvgSynthesizer(Gateway& gateway, RvgOptions options, PromptSet prompts)
    : gateway_(gateway), options_(std::move(options)), prompts_(std::move(prompts)) {
  if (!gateway_.has_backend(options_.synth_backend))
    throw Error(ErrorCode::UnknownBackend, "no backend '" + options_.synth_backend + "'");
}

namespace {

std::string tuple_text(const ScenarioContext::UniquenessKey& k) {
  return std::get<0>(k) + " | " + std::get<1>(k) + " | " + std::get<2>(k);
}

std::map<std::string, std::string> context_vars(const ScenarioContext& c) {
  return {{"cwe", c.cwe.str()},
          {"language", c.language},
          {"tech_stack", c.tech_stack},
          {"user_roles", join(c.user_roles, ", ")},
          {"functionality", c.functionality},
          {"attack_vector", c.attack_vector}};
}

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

}  // namespace

ScenarioContext RvgSynthesizer::model_context(CweId cwe, const std::vector<ScenarioContext>& history) {
  std::set<ScenarioContext::UniquenessKey> used;
  for (const auto& h : history) used.insert(h.key());

  std::string window;
  const auto first = history.size() > options_.fifo_window ? history.size() - options_.fifo_window : 0;
  for (auto i = first; i < history.size(); ++i) window += "- " + tuple_text(history[i].key()) + "\n";
  if (window.empty()) window = "(none yet)\n";
  const auto base = prompts_.render("context_modeler", {{"cwe", cwe.str()}, {"history", window}});

  const auto check = [](const AssessmentFields& f) -> std::optional<std::string> {
    for (const char* k : {"LANGUAGE", "TECH_STACK", "USER_ROLES", "FUNCTIONALITY", "ATTACK_VECTOR"}) {
      auto it = f.find(k);
      if (it == f.end() || trim(it->second).empty()) return std::string(k) + " is required";
    }
    return std::nullopt;
  };

  std::string prompt = base;
  std::optional<ScenarioContext::UniquenessKey> collision;
  for (int attempt = 1; attempt <= std::max(1, options_.context_attempts); ++attempt) {
    const auto f = ask_for_assessment(gateway_, options_.synth_backend, "context_modeler", prompt,
                                      prompts_, check, options_.parse_attempts);
    ScenarioContext c{cwe, {}, {}, {}, {}, {}};
    c.language = f.at("LANGUAGE");
    c.tech_stack = f.at("TECH_STACK");
    c.functionality = f.at("FUNCTIONALITY");
    c.attack_vector = f.at("ATTACK_VECTOR");
    for (const auto& role : split(f.at("USER_ROLES"), ','))
      if (auto r = trim(role); !r.empty()) c.user_roles.emplace_back(r);
    if (c.user_roles.empty()) c.user_roles.push_back(f.at("USER_ROLES"));
    if (!used.contains(c.key())) return c;
    collision = c.key();
    prompt = base + prompts_.render("context_collision", {{"tuple", tuple_text(*collision)}});
  }
  throw Error(ErrorCode::UniquenessExhausted,
              cwe.str() + ": scenario (" + tuple_text(*collision) + ") repeated " +
                  std::to_string(options_.context_attempts) + " times");
}

std::string RvgSynthesizer::ask_for_code(const std::string& role, const std::string& prompt) {
  std::string current = prompt;
  for (int i = 1; i <= std::max(1, options_.parse_attempts); ++i) {
    AgentRequest request;
    request.role_id = role;
    request.backend_id = options_.synth_backend;
    request.prompt = current;
    const auto response = gateway_.complete(std::move(request));
    if (auto code = first_code_block(response.text); code && !trim(*code).empty()) return *code;
    current = prompt + prompts_.render("reask", {{"problem", "the reply had no fenced code block"}});
  }
  throw Error(ErrorCode::ParseFailure, role + ": no fenced code block");
}

std::string RvgSynthesizer::implement_vulnerable(const ScenarioContext& context) {
  return ask_for_code("implementer", prompts_.render("implementer", context_vars(context)));
}

std::string RvgSynthesizer::audit_and_fix(const std::string& vuln_code, const ScenarioContext& context) {
  auto vars = context_vars(context);
  vars["vuln_code"] = vuln_code;
  auto fixed = ask_for_code("security_auditor", prompts_.render("security_auditor", vars));
  if (fixed == vuln_code)
    throw Error(ErrorCode::RemediationIdentical, "remediation is byte-identical to the vulnerable code");
  return fixed;
}

ReviewDecision RvgSynthesizer::ask_present_mitigated(const std::string& role, const std::string& backend,
                                                     const std::string& prompt) {
  const auto check = [](const AssessmentFields& f) -> std::optional<std::string> {
    std::optional<bool> present, mitigated;
    if (auto it = f.find("PRESENT"); it != f.end()) {
      present = parse_yes_no(it->second);
      if (!present) return "PRESENT must be yes or no";
    }
    if (auto it = f.find("MITIGATED"); it != f.end()) {
      mitigated = parse_yes_no(it->second);
      if (!mitigated) return "MITIGATED must be yes or no";
    }
    // A single "no" already decides the outcome.
    if (present == false || mitigated == false || (present && mitigated)) return std::nullopt;
    return "PRESENT and MITIGATED are required";
  };
  try {
    const auto f = ask_for_assessment(gateway_, backend, role, prompt, prompts_, check, options_.parse_attempts);
    const bool ok = f.contains("PRESENT") && f.contains("MITIGATED") && *parse_yes_no(f.at("PRESENT")) &&
                    *parse_yes_no(f.at("MITIGATED"));
    return ok ? ReviewDecision::approved : ReviewDecision::rejected;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ParseFailure) throw;
    return ReviewDecision::rejected;
  }
}

ReviewDecision RvgSynthesizer::review_remediation(const std::string& vuln, const std::string& fixed, CweId cwe) {
  return ask_present_mitigated(
      "security_reviewer", options_.synth_backend,
      prompts_.render("security_reviewer", {{"cwe", cwe.str()}, {"vuln_code", vuln}, {"fixed_code", fixed}}));
}

ReviewDecision RvgSynthesizer::cross_validate(const FunctionPair& pair, const std::string& validator_backend) {
  if (validator_backend == options_.synth_backend)
    throw Error(ErrorCode::SameBackend, "validator and synthesis backend are both '" + validator_backend + "'");
  const auto cwe = pair.primary_cwe() ? pair.primary_cwe()->str() : std::string("the labelled weakness");
  return ask_present_mitigated(
      "cross_validator", validator_backend,
      prompts_.render("cross_validator",
                      {{"cwe", cwe}, {"vuln_code", pair.vuln_code}, {"fixed_code", pair.fixed_code}}));
}

std::vector<SynthesisOutcome> RvgSynthesizer::synthesize(CweId cwe, std::size_t n,
                                                         const std::string& validator_backend) {
  if (n == 0) throw Error(ErrorCode::PreconditionViolation, "n must be at least 1");
  if (validator_backend == options_.synth_backend)
    throw Error(ErrorCode::SameBackend, "validator and synthesis backend are both '" + validator_backend + "'");
  if (!gateway_.has_backend(validator_backend))
    throw Error(ErrorCode::UnknownBackend, "no backend '" + validator_backend + "'");

  std::vector<ScenarioContext> history;
  std::vector<SynthesisOutcome> outcomes;
  outcomes.reserve(n);
  for (std::size_t sample = 0; sample < n; ++sample) {
    SynthesisOutcome out;
    for (int attempt = 1; attempt <= std::max(1, options_.sample_attempts); ++attempt) {
      out.attempts = attempt;
      out.context.reset();
      try {
        auto context = model_context(cwe, history);
        history.push_back(context);
        out.context = context;
        auto vuln = implement_vulnerable(context);
        auto fixed = audit_and_fix(vuln, context);
        if (normalize_code(vuln) == normalize_code(fixed)) {
          out.failure_reason = "remediation differs from the vulnerable code only in whitespace";
          continue;
        }
        if (review_remediation(vuln, fixed, cwe) != ReviewDecision::approved) {
          out.failure_reason = "security reviewer rejected the remediation";
          continue;
        }
        auto pair = FunctionPair::make("rvg", std::move(vuln), std::move(fixed), Provenance::synthesized);
        pair.cwes = {cwe};
        pair.language = to_lower(context.language);
        pair.commit_message = "Fix " + cwe.str() + " in " + context.functionality + " (" +
                              context.language + ", " + context.tech_stack + ")";
        pair.extra["scenario"] = to_json(context);
        pair.extra["synth_backend"] = options_.synth_backend;
        pair.extra["validator_backend"] = validator_backend;
        if (cross_validate(pair, validator_backend) != ReviewDecision::approved) {
          out.failure_reason = "cross-validator rejected the pair";
          continue;
        }
        pair.tag(Status::verified);
        out.pair = std::move(pair);
        out.failure_reason.reset();
        break;
      } catch (const Error& e) {
        if (e.code() == ErrorCode::BudgetExceeded) throw;
        out.failure_reason = describe(e);
      }
    }
    outcomes.push_back(std::move(out));
  }
  return outcomes;
}

std::vector<std::pair<CweId, std::vector<SynthesisOutcome>>> synthesize_all(
    RvgSynthesizer& synth, const std::vector<CweId>& cwes, std::size_t n,
    const std::string& validator_backend, int workers) {
  std::vector<std::pair<CweId, std::vector<SynthesisOutcome>>> out;
  for (const auto& c : cwes) out.emplace_back(c, std::vector<SynthesisOutcome>{});
  parallel_for_index(cwes.size(), workers, [&](std::size_t i) {
    out[i].second = synth.synthesize(cwes[i], n, validator_backend);
  });
  return out;
}

SynthesisReportRow summarize(CweId cwe, const std::vector<SynthesisOutcome>& outcomes) {
  SynthesisReportRow row{cwe};
  row.requested = outcomes.size();
  long attempts = 0;
  for (const auto& o : outcomes) {
    (o.pair ? row.accepted : row.failed)++;
    attempts += o.attempts;
  }
  row.mean_attempts = outcomes.empty() ? 0.0 : static_cast<double>(attempts) / static_cast<double>(outcomes.size());
  return row;
}

std::string synthesis_report_csv(const std::vector<SynthesisReportRow>& rows) {
  std::ostringstream out;
  out << "cwe,requested,accepted,failed,mean_attempts\n";
  for (const auto& r : rows)
    out << r.cwe.str() << ',' << r.requested << ',' << r.accepted << ',' << r.failed << ','
        << fixed(r.mean_attempts, 2) << '\n';
  return out.str();
}

}  // namespace vulnpipe
