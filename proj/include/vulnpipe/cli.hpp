#pragma once

// Subcommand dispatch for the vulnpipe tool. Every stage reads and writes
// unified JSONL and leaves a <stage>.manifest.json next to its outputs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vulnpipe/corpus.hpp"

namespace vulnpipe {

class ReviewServer;

struct BackendSpec {
  std::string id;
  std::string kind;  // "scripted" or "http"
  std::filesystem::path script;
  std::string model;
};

struct RunConfig {
  std::vector<std::string> priority;
  /// Dataset name -> adapter JSON. Unlisted datasets use data/adapters/<name>.json.
  std::map<std::string, std::filesystem::path> adapters;
  std::vector<BackendSpec> backends;
  std::string curation_backend;
  std::string synth_backend;
  std::string validator_backend;
  int consensus_threshold = 2;
  std::size_t quota = 50;
  std::filesystem::path top25_path;
  std::uint64_t seed = 0;
  std::size_t max_requests = 10000;
  int workers = 1;
  std::filesystem::path output_dir = "out";
  std::filesystem::path prompts_dir;
  std::filesystem::path nvd_cache;
  std::string nvd_base_url;
  std::optional<std::int64_t> nvd_interval_ms;

  static RunConfig from_json(const Json& j);
  static RunConfig load(const std::filesystem::path& path);
  /// Throws ConfigInvalid when a field is out of range or a referenced path is missing.
  void validate() const;
};

struct CliContext {
  std::ostream& out;
  std::ostream& err;
  /// Called once the review server is listening; tests use it to drive and stop the server.
  std::function<void(ReviewServer&, int port)> on_serving;
};

inline const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names{"ingest", "nvd-sync",  "dedup", "filter", "verify",
                                              "synthesize", "assemble", "split", "stats", "review-serve"};
  return names;
}

/// Parses argv and runs one stage. Returns 0 on success, 2 for invalid
/// configuration or usage, 1 for any other stage failure. Failures print a
/// single JSON object to `err`.
int run_cli(const std::vector<std::string>& args, CliContext& ctx);

}  // namespace vulnpipe
