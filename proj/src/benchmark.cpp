#include "vulnpipe/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "vulnpipe/error.hpp"
#include "vulnpipe/shuffle.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace {

void require_top25(const std::vector<CweId>& top25) {
  if (top25.empty()) throw Error(ErrorCode::PreconditionViolation, "the CWE list is empty");
  std::set<CweId> seen;
  for (const auto& c : top25)
    if (!seen.insert(c).second) throw Error(ErrorCode::PreconditionViolation, c.str() + " is listed twice");
}

std::map<CweId, std::vector<std::size_t>> by_primary(const std::vector<FunctionPair>& pairs) {
  std::map<CweId, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (auto c = pairs[i].primary_cwe()) out[*c].push_back(i);
  return out;
}

void require_eligible(const std::vector<FunctionPair>& pairs, Provenance expected) {
  for (const auto& p : pairs) {
    if (!p.has(Status::verified) && !p.has(Status::reviewed))
      throw Error(ErrorCode::PreconditionViolation, "pair " + p.id + " is neither verified nor reviewed");
    if (p.is_terminal())
      throw Error(ErrorCode::PreconditionViolation, "pair " + p.id + " was rejected");
    if (p.provenance != expected)
      throw Error(ErrorCode::PreconditionViolation,
                  "pair " + p.id + " has provenance " + std::string(to_string(p.provenance)) +
                      " but was passed as " + std::string(to_string(expected)));
  }
}

}  // namespace

QuotaPlan QuotaPlan::compute(const std::vector<FunctionPair>& real, const std::vector<FunctionPair>& synthesized,
                             const std::vector<CweId>& top25, std::size_t quota) {
  require_top25(top25);
  const auto r = by_primary(real);
  const auto s = by_primary(synthesized);
  QuotaPlan plan;
  for (const auto& cwe : top25) {
    QuotaEntry e{cwe};
    e.quota = quota;
    if (auto it = r.find(cwe); it != r.end()) e.real_available = it->second.size();
    if (auto it = s.find(cwe); it != s.end()) e.synth_available = it->second.size();
    e.synth_needed = quota > e.real_available ? quota - e.real_available : 0;
    plan.entries.push_back(e);
  }
  return plan;
}

bool QuotaPlan::feasible() const {
  return std::all_of(entries.begin(), entries.end(), [](const QuotaEntry& e) { return e.shortfall() == 0; });
}

std::vector<FunctionPair> assemble(const std::vector<FunctionPair>& real,
                                   const std::vector<FunctionPair>& synthesized,
                                   const std::vector<CweId>& top25, std::size_t quota) {
  if (quota == 0) throw Error(ErrorCode::PreconditionViolation, "quota must be at least 1");
  require_eligible(real, Provenance::real);
  require_eligible(synthesized, Provenance::synthesized);
  const auto plan = QuotaPlan::compute(real, synthesized, top25, quota);
  if (!plan.feasible()) {
    std::vector<std::string> missing;
    for (const auto& e : plan.entries)
      if (e.shortfall() > 0) missing.push_back(e.cwe.str() + " short by " + std::to_string(e.shortfall()));
    throw Error(ErrorCode::InsufficientSamples, join(missing, "; "));
  }

  const auto r = by_primary(real);
  const auto s = by_primary(synthesized);
  std::vector<FunctionPair> out;
  out.reserve(quota * top25.size());
  for (const auto& e : plan.entries) {
    std::size_t taken = 0;
    if (auto it = r.find(e.cwe); it != r.end())
      for (auto i : it->second) {
        if (taken == quota) break;
        out.push_back(real[i]);
        ++taken;
      }
    if (auto it = s.find(e.cwe); it != s.end())
      for (auto i : it->second) {
        if (taken == quota) break;
        out.push_back(synthesized[i]);
        ++taken;
      }
  }
  for (auto& p : out) p.tag(Status::benchmark);
  return out;
}

std::vector<std::pair<std::string, std::string>> leakage_check(const std::vector<FunctionPair>& benchmark,
                                                               const std::vector<FunctionPair>& training) {
  std::unordered_map<Fingerprint, std::vector<std::size_t>, FingerprintHash> index;
  for (std::size_t i = 0; i < training.size(); ++i) index[fingerprint(training[i])].push_back(i);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& b : benchmark)
    if (auto it = index.find(fingerprint(b)); it != index.end())
      for (auto i : it->second) out.emplace_back(b.id, training[i].id);
  return out;
}

std::vector<FunctionPair> remove_leakage(const std::vector<FunctionPair>& training,
                                         const std::vector<FunctionPair>& benchmark) {
  std::unordered_set<Fingerprint, FingerprintHash> bench;
  for (const auto& b : benchmark) bench.insert(fingerprint(b));
  std::vector<FunctionPair> out;
  for (const auto& t : training)
    if (!bench.contains(fingerprint(t))) out.push_back(t);
  return out;
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * ratios[k];
    // Snap values like 69.99999999999999 to the integer they represent.
    const double snapped = std::abs(exact - std::round(exact)) < 1e-9 ? std::round(exact) : exact;
    counts[k] = static_cast<std::size_t>(std::floor(snapped));
    remainder[k] = snapped - std::floor(snapped);
    assigned += counts[k];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[order[i % 3]];
  return counts;
}

Splits split_export(const std::vector<FunctionPair>& corpus, const SplitRatios& ratios, std::uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r >= 0.0); }) ||
      std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorCode::BadRatios, "split ratios must be non-negative and sum to 1");

  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < corpus.size(); ++i) groups[corpus[i].primary_cwe_key()].push_back(i);

  std::vector<int> slot(corpus.size(), 0);
  for (auto& [key, members] : groups) {
    seeded_shuffle(members, mix64(seed ^ fnv1a(key)));
    const auto counts = apportion(members.size(), ratios);
    for (std::size_t j = 0; j < members.size(); ++j)
      slot[members[j]] = j < counts[0] ? 0 : j < counts[0] + counts[1] ? 1 : 2;
  }
  Splits out;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    (slot[i] == 0 ? out.train : slot[i] == 1 ? out.validation : out.test).push_back(corpus[i]);
  return out;
}

Json benchmark_manifest(const std::vector<FunctionPair>& benchmark, const std::vector<CweId>& top25,
                        std::size_t quota) {
  Json per_cwe = Json::object();
  for (const auto& c : top25) per_cwe[c.str()] = {{"real", 0}, {"synthesized", 0}};
  for (const auto& p : benchmark) {
    auto& row = per_cwe[p.primary_cwe_key()];
    if (!row.contains("real")) row = {{"real", 0}, {"synthesized", 0}};
    row[p.provenance == Provenance::real ? "real" : "synthesized"] =
        row[p.provenance == Provenance::real ? "real" : "synthesized"].get<int>() + 1;
  }
  return {{"quota", quota},
          {"cwe_match", "primary"},
          {"total", benchmark.size()},
          {"per_cwe", per_cwe},
          {"fingerprint_digest", fingerprint_set_digest(benchmark)}};
}

Json split_manifest(const Splits& splits, const SplitRatios& ratios, std::uint64_t seed) {
  Json per_cwe = Json::object();
  const std::array<std::pair<const char*, const std::vector<FunctionPair>*>, 3> parts{
      {{"train", &splits.train}, {"validation", &splits.validation}, {"test", &splits.test}}};
  for (const auto& [name, part] : parts)
    for (const auto& p : *part) {
      auto& row = per_cwe[p.primary_cwe_key()];
      if (row.is_null()) row = {{"train", 0}, {"validation", 0}, {"test", 0}};
      row[name] = row[name].get<int>() + 1;
    }
  Json j{{"seed", seed},
         {"ratios", {{"train", ratios[0]}, {"validation", ratios[1]}, {"test", ratios[2]}}},
         {"stratification", "primary_cwe"},
         {"per_cwe", per_cwe}};
  for (const auto& [name, part] : parts)
    j["splits"][name] = {{"count", part->size()}, {"fingerprint_digest", fingerprint_set_digest(*part)}};
  return j;
}

}  // namespace vulnpipe
