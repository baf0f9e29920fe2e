#pragma once

// Human review of benchmark pairs: seeded assignment, an append-only verdict
// log that is replayed on restart, and the HTTP API the review UI consumes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

struct ReviewVerdict {
  std::string pair_id;
  std::string reviewer;
  bool genuine = false;
  bool self_contained = false;
  bool cwe_correct = false;
  std::optional<std::string> notes;
  std::int64_t timestamp_ms = 0;  // stamped by the session

  /// All three criteria hold.
  bool correct() const { return genuine && self_contained && cwe_correct; }
};

Json to_json(const ReviewVerdict& v);
/// Throws ParseFailure on missing or mistyped fields.
ReviewVerdict verdict_from_json(const Json& j);

/// Fraction of verdicts meeting all three criteria. Throws NoVerdicts.
double correctness(const std::vector<ReviewVerdict>& verdicts);

struct SessionManifest {
  std::vector<std::string> pool;  // pair ids
  std::uint64_t seed = 0;
  std::vector<std::string> reviewers;
  int reviews_per_pair = 1;
  /// Pairs per reviewer; 0 spreads the whole pool.
  std::size_t per_reviewer = 0;

  Json to_json() const;
  static SessionManifest from_json(const Json& j);
  /// Throws ConfigInvalid.
  void validate() const;
};

using Assignments = std::map<std::string, std::vector<std::string>>;

/// Shuffles the pool with the seed, keeps the first
/// min(pool, per_reviewer * reviewers / reviews_per_pair) ids when a quota is
/// set, then deals them round-robin. Copy c of each pair goes to the reviewer
/// c positions after the first, so no reviewer sees a pair twice.
Assignments assign_pairs(const SessionManifest& manifest);

struct ReviewProgress {
  std::size_t assigned = 0;
  std::size_t completed = 0;
  std::optional<double> correctness;  // nullopt until a verdict exists
};

class ReviewSession {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds since the epoch

  /// `log_path` may be empty for an in-memory session. An existing log is
  /// replayed; a truncated final line from an interrupted write is ignored.
  ReviewSession(SessionManifest manifest, std::vector<FunctionPair> pairs,
                std::filesystem::path log_path = {}, Clock clock = {});

  const SessionManifest& manifest() const { return manifest_; }
  const Assignments& assignments() const { return assignments_; }

  /// Next unreviewed pair in the reviewer's queue. Throws UnknownReviewer.
  std::optional<FunctionPair> next_assignment(const std::string& reviewer) const;

  /// Stamps and appends the verdict. Throws UnknownReviewer, NotAssigned or
  /// DuplicateVerdict.
  ReviewVerdict submit_verdict(ReviewVerdict v);

  /// Whole session, or one reviewer when given.
  ReviewProgress progress(const std::optional<std::string>& reviewer = std::nullopt) const;

  std::optional<FunctionPair> pair(const std::string& id) const;
  std::vector<ReviewVerdict> verdicts() const;

 private:
  void apply(const ReviewVerdict& v);  // caller holds the write lock
  void check(const ReviewVerdict& v) const;

  SessionManifest manifest_;
  Assignments assignments_;
  std::map<std::string, FunctionPair> pairs_;
  std::filesystem::path log_path_;
  Clock clock_;

  mutable std::shared_mutex mu_;
  std::vector<ReviewVerdict> verdicts_;
  std::map<std::string, std::map<std::string, std::size_t>> done_;  // reviewer -> pair -> verdict index
  std::int64_t last_timestamp_ = 0;
  std::ofstream log_;
};

/// JSON-over-HTTP front end for a session.
class ReviewServer {
 public:
  explicit ReviewServer(ReviewSession& session, std::filesystem::path static_dir = {});
  ~ReviewServer();

  /// Binds to host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();
  void wait_until_ready();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vulnpipe
