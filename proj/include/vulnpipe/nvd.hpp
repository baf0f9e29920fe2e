#pragma once

// CWE reconciliation against the NVD CVE API, with a local append-only cache
// and client-side rate limiting.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

/// What the NVD says about one CVE. `values` are the raw weakness strings in
/// NVD order, e.g. "CWE-79" or the category markers "NVD-CWE-noinfo".
struct NvdAnswer {
  bool found = false;
  std::vector<std::string> values;
};

/// Transport to an NVD-compatible service. Implementations throw
/// Error(TransientFailure) for retryable failures.
class NvdSource {
 public:
  virtual ~NvdSource() = default;
  virtual NvdAnswer query(const std::string& cve) = 0;
};

/// NVD CVE API 2.0 over HTTP(S): GET <base>/rest/json/cves/2.0?cveId=<id>.
class HttpNvdSource final : public NvdSource {
 public:
  static constexpr const char* kDefaultBaseUrl = "https://services.nvd.nist.gov";

  explicit HttpNvdSource(std::string base_url = kDefaultBaseUrl,
                         std::optional<std::string> api_key = std::nullopt,
                         std::chrono::seconds timeout = std::chrono::seconds(30));

  NvdAnswer query(const std::string& cve) override;

 private:
  std::string base_url_;
  std::optional<std::string> api_key_;
  std::chrono::seconds timeout_;
};

/// Extracts weakness values from an NVD 2.0 response body.
NvdAnswer parse_nvd_response(const std::string& body);

struct CacheEntry {
  std::string cve;
  NvdAnswer answer;
  std::int64_t fetched_at = 0;  // unix seconds
};

/// Append-only JSONL cache keyed by CVE; the latest line for a CVE wins.
class NvdCache {
 public:
  using Clock = std::function<std::int64_t()>;

  /// An empty path keeps the cache in memory only.
  explicit NvdCache(std::filesystem::path path = {},
                    std::chrono::seconds ttl = std::chrono::hours(24 * 30),
                    Clock clock = nullptr);

  std::optional<CacheEntry> lookup(const std::string& cve) const;
  void store(const std::string& cve, const NvdAnswer& answer);
  std::size_t size() const;
  std::int64_t now() const { return clock_(); }

 private:
  std::filesystem::path path_;
  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, CacheEntry> entries_;
};

struct NvdClientOptions {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{500};
  /// Minimum spacing between request starts; NVD asks for ~6 s without a key.
  std::chrono::milliseconds request_interval{6000};
  int max_in_flight = 2;

  static NvdClientOptions public_defaults(bool have_api_key);
};

/// Resolved CWE view of one CVE.
struct NvdRecord {
  std::vector<CweId> cwes;
  /// Category-only markers such as NVD-CWE-noinfo or NVD-CWE-Other.
  std::vector<std::string> categories;
};

class NvdClient {
 public:
  NvdClient(NvdSource& source, NvdCache& cache, NvdClientOptions options = {});

  /// Throws MalformedCve, NotFound, or NvdUnavailable after bounded retries.
  NvdRecord fetch(const std::string& cve);
  /// CWE identifiers currently recorded for the CVE (possibly empty).
  std::vector<CweId> fetch_cwe(const std::string& cve) { return fetch(cve).cwes; }

  int max_in_flight() const { return options_.max_in_flight; }
  /// Number of requests that actually left the process.
  std::size_t network_requests() const;

 private:
  NvdAnswer query_with_retries(const std::string& cve);
  void pace();

  NvdSource& source_;
  NvdCache& cache_;
  NvdClientOptions options_;
  std::counting_semaphore<64> in_flight_;
  mutable std::mutex pace_mu_;
  std::chrono::steady_clock::time_point next_slot_{};
  std::size_t requests_ = 0;
};

struct MismatchCounts {
  std::size_t matched = 0;
  std::size_t mismatched_corrected = 0;
  std::size_t cve_absent = 0;
  std::size_t nvd_unresolved = 0;

  std::size_t examined() const {
    return matched + mismatched_corrected + cve_absent + nvd_unresolved;
  }
};

struct MismatchReport {
  /// Per source, in order of first appearance in the corpus.
  std::vector<std::pair<std::string, MismatchCounts>> per_source;
  std::size_t total_corrected = 0;

  const MismatchCounts* find(const std::string& source) const;
  /// CSV: source,matched,mismatched_corrected,cve_absent,nvd_unresolved
  std::string to_csv() const;
};

struct ReconcileOptions {
  /// Fraction of CVE-bearing records allowed to fail with NvdUnavailable
  /// before the whole run aborts.
  double failure_budget = 0.05;
};

struct ReconcileResult {
  std::vector<FunctionPair> pairs;
  MismatchReport report;
};

ReconcileResult reconcile(std::vector<FunctionPair> corpus, NvdClient& client,
                          const ReconcileOptions& options = {});

}  // namespace vulnpipe
