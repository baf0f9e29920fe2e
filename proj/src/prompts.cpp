#include "vulnpipe/prompts.hpp"

#include <fstream>
#include <sstream>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace {

constexpr const char* kBlockHelp =
    "Reply with exactly one block in this form and nothing after it:\n"
    "===BEGIN_ASSESSMENT===\n";

const std::map<std::string, std::string>& builtin() {
  static const std::map<std::string, std::string> t{
      {"relevance",
       std::string("You are screening code changes mined from vulnerability-fix commits.\n"
                   "Decide whether this change fixes a security weakness, and whether the "
                   "vulnerable function can be understood without the rest of its repository.\n\n"
                   "{{context}}\n"
                   "Change (lines starting with '-' were removed, '+' were added):\n"
                   "{{diff}}\n\n") +
           kBlockHelp +
           "SECURITY: yes or no\n"
           "SELF_CONTAINED: yes or no\n"
           "EVIDENCE: one sentence\n"
           "===END_ASSESSMENT===\n"},
      {"auditor",
       std::string("You are a security auditor. Examine the code change, the commit message and "
                   "the CWE labels below, and decide whether the change fixes a real "
                   "vulnerability of the labelled kind. Cite the specific lines that support "
                   "your verdict.\n\n"
                   "{{context}}\n"
                   "Change (lines starting with '-' were removed, '+' were added):\n"
                   "{{diff}}\n\n") +
           kBlockHelp +
           "VERDICT: security_fix, not_security_fix or undetermined\n"
           "EVIDENCE: the lines and reasoning behind the verdict\n"
           "===END_ASSESSMENT===\n"},
      {"critic",
       std::string("You are reviewing another auditor's findings about a code change. Check "
                   "them for accuracy, completeness and robustness. Agree only if the evidence "
                   "holds up against the code itself.\n\n"
                   "{{context}}\n"
                   "Change (lines starting with '-' were removed, '+' were added):\n"
                   "{{diff}}\n\n"
                   "Auditor verdict: {{auditor_verdict}}\n"
                   "Auditor evidence: {{auditor_evidence}}\n\n") +
           kBlockHelp +
           "VERDICT: security_fix, not_security_fix or undetermined\n"
           "EVIDENCE: what you confirmed or refuted\n"
           "===END_ASSESSMENT===\n"},
      {"consensus",
       std::string("Two reviewers assessed whether a code change fixes a vulnerability. Weigh "
                   "both assessments against the code and rate how likely it is that the "
                   "pre-change function is genuinely vulnerable and the change fixes it.\n"
                   "0 = very unlikely, 1 = unlikely, 2 = likely, 3 = very likely.\n\n"
                   "{{context}}\n"
                   "Change (lines starting with '-' were removed, '+' were added):\n"
                   "{{diff}}\n\n"
                   "Auditor verdict: {{auditor_verdict}}\n"
                   "Auditor evidence: {{auditor_evidence}}\n"
                   "Critic verdict: {{critic_verdict}}\n"
                   "Critic evidence: {{critic_evidence}}\n\n") +
           kBlockHelp +
           "SCORE: an integer from 0 to 3\n"
           "EVIDENCE: one sentence\n"
           "===END_ASSESSMENT===\n"},
      {"reask",
       "\n\nYour previous reply could not be used: {{problem}}. Answer again, following the "
       "required block format exactly.\n"},
      {"context_modeler",
       std::string("Design a realistic software scenario in which a developer could "
                   "plausibly introduce {{cwe}}. Pick a programming language, a technology "
                   "stack, the user roles involved, the functionality being built and the "
                   "attack vector.\n"
                   "The scenario must differ from these recently used ones "
                   "(language | stack | functionality):\n"
                   "{{history}}\n\n") +
           kBlockHelp +
           "LANGUAGE: ...\n"
           "TECH_STACK: ...\n"
           "USER_ROLES: comma-separated list\n"
           "FUNCTIONALITY: ...\n"
           "ATTACK_VECTOR: ...\n"
           "===END_ASSESSMENT===\n"},
      {"context_collision",
       "\n\nThe scenario ({{tuple}}) has already been used. Choose a different combination of "
       "language, technology stack and functionality.\n"},
      {"implementer",
       "Write one realistic, self-contained {{language}} function for the scenario below. It "
       "must contain a {{cwe}} weakness that arises naturally from the implementation. Comments "
       "may describe what the code does but must not mention the weakness.\n\n"
       "Technology stack: {{tech_stack}}\n"
       "User roles: {{user_roles}}\n"
       "Functionality: {{functionality}}\n"
       "Attack vector: {{attack_vector}}\n\n"
       "Return only the code in a single fenced code block.\n"},
      {"security_auditor",
       "You are a security engineer. The {{language}} code below contains a {{cwe}} weakness. "
       "Produce a secure, production-ready version of the same function that keeps its "
       "behaviour for legitimate use.\n\n"
       "```\n{{vuln_code}}\n```\n\n"
       "Return only the fixed code in a single fenced code block.\n"},
      {"security_reviewer",
       std::string("Check a vulnerability and its remediation. Decide whether {{cwe}} is "
                   "present in the original code and whether the revised code properly "
                   "mitigates it without introducing new weaknesses.\n\n"
                   "Original:\n```\n{{vuln_code}}\n```\n\n"
                   "Revised:\n```\n{{fixed_code}}\n```\n\n") +
           kBlockHelp +
           "PRESENT: yes or no\n"
           "MITIGATED: yes or no\n"
           "EVIDENCE: one sentence\n"
           "===END_ASSESSMENT===\n"},
      {"cross_validator",
       std::string("Independently judge this vulnerable/fixed code pair. Decide whether "
                   "{{cwe}} is present in the vulnerable version and whether the fixed "
                   "version mitigates it.\n\n"
                   "Vulnerable:\n```\n{{vuln_code}}\n```\n\n"
                   "Fixed:\n```\n{{fixed_code}}\n```\n\n") +
           kBlockHelp +
           "PRESENT: yes or no\n"
           "MITIGATED: yes or no\n"
           "EVIDENCE: one sentence\n"
           "===END_ASSESSMENT===\n"},
  };
  return t;
}

}  // namespace

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.templates_ = builtin();
  return p;
}

const std::vector<std::string>& PromptSet::names() {
  static const std::vector<std::string> n = [] {
    std::vector<std::string> v;
    for (const auto& [k, _] : builtin()) v.push_back(k);
    return v;
  }();
  return n;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  auto p = defaults();
  if (!std::filesystem::is_directory(dir))
    throw Error(ErrorCode::ConfigInvalid, "prompt directory " + dir.string() + " does not exist");
  for (const auto& name : names()) {
    const auto file = dir / (name + ".txt");
    if (!std::filesystem::exists(file)) continue;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    p.templates_[name] = ss.str();
  }
  return p;
}

const std::string& PromptSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw Error(ErrorCode::ConfigInvalid, "no prompt template '" + name + "'");
  return it->second;
}

void PromptSet::set(const std::string& name, std::string text) { templates_[name] = std::move(text); }

std::string PromptSet::render(const std::string& name,
                              const std::map<std::string, std::string>& vars) const {
  const auto& tpl = get(name);
  std::string out;
  out.reserve(tpl.size());
  std::size_t pos = 0;
  while (true) {
    const auto open = tpl.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = tpl.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(tpl, pos, open - pos);
    const auto key = tpl.substr(open + 2, close - open - 2);
    auto it = vars.find(key);
    if (it == vars.end())
      throw Error(ErrorCode::ConfigInvalid, "template '" + name + "' uses unknown variable '" + key + "'");
    out += it->second;
    pos = close + 2;
  }
  out.append(tpl, pos);
  return out;
}

void PromptSet::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [name, text] : templates_) {
    std::ofstream out(dir / (name + ".txt"), std::ios::binary);
    out << text;
    if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + (dir / (name + ".txt")).string());
  }
}

std::string line_diff(const std::string& before, const std::string& after) {
  const auto a = split(before, '\n');
  const auto b = split(after, '\n');
  std::size_t pre = 0;
  while (pre < a.size() && pre < b.size() && a[pre] == b[pre]) ++pre;
  std::size_t suf = 0;
  while (suf < a.size() - pre && suf < b.size() - pre &&
         a[a.size() - 1 - suf] == b[b.size() - 1 - suf])
    ++suf;
  const std::size_t n = a.size() - pre - suf;
  const std::size_t m = b.size() - pre - suf;

  std::string out;
  auto emit = [&out](char tag, const std::string& line) {
    out += tag;
    out += line;
    out += '\n';
  };
  for (std::size_t i = 0; i < pre; ++i) emit(' ', a[i]);

  // LCS over the differing middle; very large middles degrade to remove-all/add-all.
  constexpr std::size_t kMaxCells = 4'000'000;
  if (n > 0 && m > 0 && (n + 1) * (m + 1) <= kMaxCells) {
    std::vector<std::uint32_t> L((n + 1) * (m + 1), 0);
    auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return L[i * (m + 1) + j]; };
    for (std::size_t i = n; i-- > 0;)
      for (std::size_t j = m; j-- > 0;)
        at(i, j) = a[pre + i] == b[pre + j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
    std::size_t i = 0, j = 0;
    while (i < n && j < m) {
      if (a[pre + i] == b[pre + j]) {
        emit(' ', a[pre + i]);
        ++i, ++j;
      } else if (at(i + 1, j) >= at(i, j + 1)) {
        emit('-', a[pre + i++]);
      } else {
        emit('+', b[pre + j++]);
      }
    }
    while (i < n) emit('-', a[pre + i++]);
    while (j < m) emit('+', b[pre + j++]);
  } else {
    for (std::size_t i = 0; i < n; ++i) emit('-', a[pre + i]);
    for (std::size_t j = 0; j < m; ++j) emit('+', b[pre + j]);
  }
  for (std::size_t i = a.size() - suf; i < a.size(); ++i) emit(' ', a[i]);
  return out;
}

}  // namespace vulnpipe
