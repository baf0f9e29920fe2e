#pragma once

// Balanced benchmark assembly with per-CWE quotas, leakage removal against a
// training corpus, and stratified train/validation/test splits.

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

struct QuotaEntry {
  CweId cwe;
  std::size_t quota = 0;
  std::size_t real_available = 0;
  std::size_t synth_available = 0;
  std::size_t synth_needed = 0;  // max(0, quota - real_available)

  std::size_t shortfall() const { return synth_needed > synth_available ? synth_needed - synth_available : 0; }
};

/// Pairs are matched to a CWE by their primary (first) label.
struct QuotaPlan {
  std::vector<QuotaEntry> entries;

  static QuotaPlan compute(const std::vector<FunctionPair>& real, const std::vector<FunctionPair>& synthesized,
                           const std::vector<CweId>& top25, std::size_t quota);
  bool feasible() const;
};

/// Per CWE in `top25` order: up to `quota` real pairs in input order, then
/// synthesized pairs of the same primary CWE to fill the quota. Every
/// selected pair is tagged `benchmark`. Throws InsufficientSamples naming
/// every deficient CWE, or PreconditionViolation for unverified input.
std::vector<FunctionPair> assemble(const std::vector<FunctionPair>& real,
                                   const std::vector<FunctionPair>& synthesized,
                                   const std::vector<CweId>& top25, std::size_t quota = 50);

/// (benchmark id, training id) for every fingerprint collision, in benchmark
/// then training order.
std::vector<std::pair<std::string, std::string>> leakage_check(const std::vector<FunctionPair>& benchmark,
                                                               const std::vector<FunctionPair>& training);

/// Training records whose fingerprint does not occur in the benchmark.
std::vector<FunctionPair> remove_leakage(const std::vector<FunctionPair>& training,
                                         const std::vector<FunctionPair>& benchmark);

using SplitRatios = std::array<double, 3>;
inline constexpr SplitRatios kDefaultRatios{0.70, 0.15, 0.15};

struct Splits {
  std::vector<FunctionPair> train;
  std::vector<FunctionPair> validation;
  std::vector<FunctionPair> test;
};

/// Largest-remainder apportionment of n items; ties go to the earlier slot.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios);

/// Stratifies by primary CWE key, shuffles each group with a seed derived
/// from (seed, key) and apportions it. Each split keeps input order.
/// Throws BadRatios unless the ratios are non-negative and sum to 1 within 1e-9.
Splits split_export(const std::vector<FunctionPair>& corpus, const SplitRatios& ratios = kDefaultRatios,
                    std::uint64_t seed = 0);

Json benchmark_manifest(const std::vector<FunctionPair>& benchmark, const std::vector<CweId>& top25,
                        std::size_t quota);
Json split_manifest(const Splits& splits, const SplitRatios& ratios, std::uint64_t seed);

}  // namespace vulnpipe
