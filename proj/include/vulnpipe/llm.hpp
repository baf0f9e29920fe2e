#pragma once

// Uniform "send text, receive text" access to generation backends, with
// retries, a global request budget, per-backend concurrency limits and a
// transcript of every attempt. The scripted backend makes every agent stage
// reproducible without network access.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

struct AgentRequest {
  std::string role_id;
  std::string backend_id;
  std::string prompt;
  std::size_t max_output = 16000;  // characters
  int attempt = 1;
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct AgentResponse {
  std::string text;
  std::string backend_id;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> usage;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& id() const = 0;
  /// Throws Error(TransientFailure) for retryable problems; any other Error is final.
  virtual AgentResponse complete(const AgentRequest& request) = 0;
  /// True when requests leave the process.
  virtual bool is_live() const = 0;
};

/// Replays responses from a fixture. Each fixture line is a JSON object:
///
///   {"role_id": "auditor", "prompt_digest": "<sha256 hex of prompt>", "response": "..."}
///
/// `prompt_digest` may be "*" to match any prompt for the role, and a line may
/// use "prompt_contains": "<substring>" instead of a digest. Lookup precedence
/// is exact digest, then substring (file order), then wildcard. Repeated lines
/// with the same key form a queue consumed one per call; the last entry keeps
/// answering once the queue is drained. A line with "error": "transient" in
/// place of "response" injects a retryable failure.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::string id);

  static std::unique_ptr<ScriptedBackend> load(std::string id, const std::filesystem::path& fixture);

  void add_exact(const std::string& role_id, const std::string& prompt, std::string response);
  void add_digest(const std::string& role_id, const std::string& digest, std::string response);
  void add_contains(const std::string& role_id, const std::string& needle, std::string response);
  void add_any(const std::string& role_id, std::string response);
  void add_transient_failure(const std::string& role_id, const std::string& digest_or_star);
  void add_line(const Json& line);

  const std::string& id() const override { return id_; }
  AgentResponse complete(const AgentRequest& request) override;
  bool is_live() const override { return false; }

 private:
  struct Step {
    std::optional<std::string> response;  // nullopt = transient failure
  };
  struct Queue {
    std::vector<Step> steps;
    std::size_t cursor = 0;
  };
  enum class MatchKind { digest, contains, any };
  struct Key {
    std::string role_id;
    MatchKind kind;
    std::string pattern;
    friend auto operator<=>(const Key&, const Key&) = default;
  };

  void push(Key key, Step step);
  std::string next(Queue& q, const AgentRequest& request);

  std::string id_;
  std::mutex mu_;
  std::map<Key, Queue> queues_;
  std::vector<Key> contains_order_;
};

/// OpenAI-compatible chat-completions endpoint. Base URL and key come from
/// LLM_BASE_URL_<ID> / LLM_API_KEY_<ID>, falling back to LLM_BASE_URL /
/// LLM_API_KEY, where <ID> is the backend id upper-cased with non-alphanumerics
/// mapped to '_'.
class HttpChatBackend final : public Backend {
 public:
  HttpChatBackend(std::string id, std::string model, std::string base_url, std::string api_key,
                  std::chrono::seconds timeout = std::chrono::seconds(120));

  /// Throws ConfigInvalid when the base URL or key is missing from the environment.
  static std::unique_ptr<HttpChatBackend> from_env(std::string id, std::string model);

  const std::string& id() const override { return id_; }
  AgentResponse complete(const AgentRequest& request) override;
  bool is_live() const override { return true; }

 private:
  std::string id_;
  std::string model_;
  std::string origin_;  // scheme://host[:port]
  std::string path_prefix_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

std::string env_suffix(const std::string& backend_id);

struct GatewayOptions {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{1000};
  std::size_t max_requests = 10000;
  int max_in_flight_per_backend = 4;
  /// JSONL transcript; empty keeps it in memory only.
  std::filesystem::path transcript_path;
};

/// Thread-safe facade over registered backends.
class Gateway {
 public:
  explicit Gateway(GatewayOptions options = {});
  ~Gateway();

  void register_backend(std::unique_ptr<Backend> backend);
  bool has_backend(const std::string& id) const;
  std::vector<std::string> backend_ids() const;
  bool any_live_backend() const;

  /// Throws UnknownBackend, BudgetExceeded, BackendFailure or UnscriptedRequest.
  AgentResponse complete(AgentRequest request);

  std::size_t requests_used() const;
  /// One JSON object per attempt, in the order attempts finished.
  std::vector<Json> transcript() const;

 private:
  struct Slot {
    std::unique_ptr<Backend> backend;
    std::unique_ptr<std::counting_semaphore<256>> in_flight;
  };

  void reserve_request(const AgentRequest& request);
  void log_attempt(const AgentRequest& request, const std::optional<AgentResponse>& response,
                   const std::string& error);

  GatewayOptions options_;
  std::map<std::string, Slot> backends_;
  mutable std::mutex mu_;
  std::size_t used_ = 0;
  std::vector<Json> transcript_;
  std::ofstream transcript_out_;
};

}  // namespace vulnpipe
