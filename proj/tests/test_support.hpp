#pragma once

// Shared fixtures and brute-force oracles for the test suites. Nothing here
// calls into the fingerprint or dedup code paths it is used to check.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe::testing {

/// Whitespace stripper written against the encoded byte sequences of every
/// White_Space code point, independent of the decoder in normalize_code.
inline std::string oracle_normalize(const std::string& s) {
  static const std::array<std::string, 25> kSpaces{
      "\t", "\n", "\v", "\f", "\r", " ",
      "\xC2\x85", "\xC2\xA0", "\xE1\x9A\x80",
      "\xE2\x80\x80", "\xE2\x80\x81", "\xE2\x80\x82", "\xE2\x80\x83", "\xE2\x80\x84",
      "\xE2\x80\x85", "\xE2\x80\x86", "\xE2\x80\x87", "\xE2\x80\x88", "\xE2\x80\x89",
      "\xE2\x80\x8A", "\xE2\x80\xA8", "\xE2\x80\xA9", "\xE2\x80\xAF", "\xE2\x81\x9F",
      "\xE3\x80\x80"};
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    bool matched = false;
    for (const auto& sp : kSpaces) {
      if (s.compare(i, sp.size(), sp) == 0) {
        i += sp.size();
        matched = true;
        break;
      }
    }
    if (!matched) out.push_back(s[i++]);
  }
  return out;
}

inline FunctionPair pair(const std::string& source, const std::string& vuln,
                         const std::string& fixed, std::vector<int> cwes = {}) {
  auto p = FunctionPair::make(source, vuln, fixed);
  for (int c : cwes) p.cwes.emplace_back(c);
  p.language = "c";
  p.tag(Status::ingested);
  return p;
}

/// Random whitespace re-rendering of a token string.
inline std::string respace(const std::string& tokens, std::mt19937_64& rng) {
  static const std::array<std::string, 6> kGlue{"", " ", "\t", "\n", "  ", "\r\n"};
  std::string out;
  for (char c : tokens) {
    out += kGlue[rng() % kGlue.size()];
    out.push_back(c);
  }
  out += kGlue[rng() % kGlue.size()];
  return out;
}

/// Corpus with seeded duplicate structure: code bodies come from a small pool
/// so complete-pair duplicates, self-identical pairs and cross matches all
/// occur, each re-rendered with random whitespace.
inline std::vector<FunctionPair> random_corpus(std::uint64_t seed, std::size_t max_size,
                                               const std::string& source = "ds") {
  std::mt19937_64 rng(seed);
  const std::size_t n = 1 + rng() % max_size;
  const std::size_t pool = 2 + rng() % std::max<std::size_t>(3, n / 2);
  std::vector<std::string> bodies;
  for (std::size_t i = 0; i < pool; ++i) bodies.push_back("f" + std::to_string(i) + "(){r;}");
  std::vector<FunctionPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = bodies[rng() % pool];
    const auto& f = (rng() % 8 == 0) ? v : bodies[rng() % pool];
    // Distinct ids even for duplicate content: vary the source suffix occasionally.
    out.push_back(pair(source, respace(v, rng), respace(f, rng), {1 + int(rng() % 5)}));
  }
  return out;
}

struct OracleCounts {
  std::size_t complete = 0, self_identical = 0, cross = 0;
};

/// O(n^2) reference for complete-pair removal: index i is removed iff an
/// earlier j has equal normalized texts on both sides.
inline std::vector<bool> oracle_complete_removed(const std::vector<FunctionPair>& c) {
  std::vector<bool> removed(c.size(), false);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (oracle_normalize(c[i].vuln_code) == oracle_normalize(c[j].vuln_code) &&
          oracle_normalize(c[i].fixed_code) == oracle_normalize(c[j].fixed_code)) {
        removed[i] = true;
        break;
      }
    }
  }
  return removed;
}

inline std::vector<bool> oracle_self_removed(const std::vector<FunctionPair>& c) {
  std::vector<bool> removed(c.size());
  for (std::size_t i = 0; i < c.size(); ++i)
    removed[i] = oracle_normalize(c[i].vuln_code) == oracle_normalize(c[i].fixed_code);
  return removed;
}

inline std::vector<bool> oracle_cross_removed(const std::vector<FunctionPair>& c) {
  std::vector<bool> removed(c.size(), false);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (i != j && oracle_normalize(c[i].vuln_code) == oracle_normalize(c[j].fixed_code)) {
        removed[i] = true;
        break;
      }
    }
  }
  return removed;
}

template <typename T>
std::vector<T> filter_out(const std::vector<T>& items, const std::vector<bool>& removed) {
  std::vector<T> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (!removed[i]) out.push_back(items[i]);
  return out;
}

inline std::size_t count_true(const std::vector<bool>& v) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), true));
}

inline std::vector<std::string> ids(const std::vector<FunctionPair>& c) {
  std::vector<std::string> out;
  for (const auto& p : c) out.push_back(p.id);
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("vulnpipe_" + name + "_" + std::to_string(std::random_device{}()));
  std::filesystem::create_directories(dir);
  return dir;
}

/// Brute-force leakage reference: every (benchmark, training) index pair whose
/// normalized sides both match.
inline std::vector<std::pair<std::string, std::string>> oracle_leaks(const std::vector<FunctionPair>& bench,
                                                                     const std::vector<FunctionPair>& train) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& b : bench)
    for (const auto& t : train)
      if (oracle_normalize(b.vuln_code) == oracle_normalize(t.vuln_code) &&
          oracle_normalize(b.fixed_code) == oracle_normalize(t.fixed_code))
        out.emplace_back(b.id, t.id);
  return out;
}

/// "n (p.pp%)" using integer arithmetic only: hundredths of a percent rounded
/// half up, with thousands separators added by hand.
inline std::string oracle_removed_cell(std::uint64_t initial, std::uint64_t after) {
  const std::uint64_t removed = initial - after;
  const std::uint64_t bp = initial == 0 ? 0 : (removed * 20000 + initial) / (2 * initial);
  std::string digits = std::to_string(removed), grouped;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) grouped += ',';
    grouped += digits[i];
  }
  const auto frac = std::to_string(bp % 100);
  return grouped + " (" + std::to_string(bp / 100) + "." + (frac.size() == 1 ? "0" + frac : frac) + "%)";
}

/// Marks a pair as having passed verification, as upstream stages would.
inline FunctionPair verified(FunctionPair p) {
  p.tag(Status::verified);
  return p;
}

}  // namespace vulnpipe::testing
