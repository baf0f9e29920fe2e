#include "vulnpipe/llm.hpp"

#include <httplib.h>

#include <cctype>
#include <cstdlib>
#include <thread>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedBackend::ScriptedBackend(std::string id) : id_(std::move(id)) {}

std::unique_ptr<ScriptedBackend> ScriptedBackend::load(std::string id,
                                                        const std::filesystem::path& fixture) {
  auto backend = std::make_unique<ScriptedBackend>(std::move(id));
  std::ifstream in(fixture);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read script " + fixture.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      backend->add_line(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid,
                  fixture.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::push(Key key, Step step) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = queues_.try_emplace(key);
  if (inserted && key.kind == MatchKind::contains) contains_order_.push_back(key);
  it->second.steps.push_back(std::move(step));
}

void ScriptedBackend::add_exact(const std::string& role_id, const std::string& prompt,
                                std::string response) {
  add_digest(role_id, sha256_hex(prompt), std::move(response));
}

void ScriptedBackend::add_digest(const std::string& role_id, const std::string& digest,
                                 std::string response) {
  if (digest == "*") return add_any(role_id, std::move(response));
  push({role_id, MatchKind::digest, to_lower(digest)}, {std::move(response)});
}

void ScriptedBackend::add_contains(const std::string& role_id, const std::string& needle,
                                   std::string response) {
  push({role_id, MatchKind::contains, needle}, {std::move(response)});
}

void ScriptedBackend::add_any(const std::string& role_id, std::string response) {
  push({role_id, MatchKind::any, ""}, {std::move(response)});
}

void ScriptedBackend::add_transient_failure(const std::string& role_id,
                                            const std::string& digest_or_star) {
  if (digest_or_star == "*")
    push({role_id, MatchKind::any, ""}, {std::nullopt});
  else
    push({role_id, MatchKind::digest, to_lower(digest_or_star)}, {std::nullopt});
}

void ScriptedBackend::add_line(const Json& j) {
  const auto role = j.at("role_id").get<std::string>();
  Key key;
  key.role_id = role;
  if (j.contains("prompt_contains")) {
    key.kind = MatchKind::contains;
    key.pattern = j["prompt_contains"].get<std::string>();
  } else {
    const auto digest = j.value("prompt_digest", std::string("*"));
    key.kind = digest == "*" ? MatchKind::any : MatchKind::digest;
    key.pattern = digest == "*" ? "" : to_lower(digest);
  }
  if (j.contains("response")) {
    push(std::move(key), {j["response"].get<std::string>()});
  } else if (j.value("error", std::string{}) == "transient") {
    push(std::move(key), {std::nullopt});
  } else {
    throw Error(ErrorCode::ConfigInvalid, "script line needs 'response' or 'error'");
  }
}

std::string ScriptedBackend::next(Queue& q, const AgentRequest& request) {
  const Step& step = q.steps[std::min(q.cursor, q.steps.size() - 1)];
  if (q.cursor < q.steps.size()) ++q.cursor;
  if (!step.response) {
    throw Error(ErrorCode::TransientFailure,
                "scripted transient failure for role '" + request.role_id + "'");
  }
  return *step.response;
}

AgentResponse ScriptedBackend::complete(const AgentRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  std::string text;
  {
    std::lock_guard lock(mu_);
    Queue* q = nullptr;
    if (auto it = queues_.find({request.role_id, MatchKind::digest, sha256_hex(request.prompt)});
        it != queues_.end()) {
      q = &it->second;
    }
    for (std::size_t i = 0; !q && i < contains_order_.size(); ++i) {
      const auto& k = contains_order_[i];
      if (k.role_id == request.role_id && request.prompt.find(k.pattern) != std::string::npos)
        q = &queues_.at(k);
    }
    if (!q) {
      if (auto it = queues_.find({request.role_id, MatchKind::any, ""}); it != queues_.end())
        q = &it->second;
    }
    if (!q) {
      throw Error(ErrorCode::UnscriptedRequest,
                  "backend '" + id_ + "' has no script for role '" + request.role_id +
                      "' and prompt digest " + sha256_hex(request.prompt));
    }
    text = next(*q, request);
  }
  if (text.size() > request.max_output) text.resize(request.max_output);
  return {std::move(text), id_,
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                start),
          std::nullopt};
}

// ---------------------------------------------------------------------------
// HTTP chat backend

std::string env_suffix(const std::string& backend_id) {
  std::string s;
  for (unsigned char c : backend_id) s.push_back(std::isalnum(c) ? static_cast<char>(std::toupper(c)) : '_');
  return s;
}

namespace {

std::optional<std::string> getenv_str(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

}  // namespace

HttpChatBackend::HttpChatBackend(std::string id, std::string model, std::string base_url,
                                 std::string api_key, std::chrono::seconds timeout)
    : id_(std::move(id)), model_(std::move(model)), api_key_(std::move(api_key)), timeout_(timeout) {
  const auto scheme_end = base_url.find("://");
  const auto path_start =
      base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  origin_ = base_url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::unique_ptr<HttpChatBackend> HttpChatBackend::from_env(std::string id, std::string model) {
  const auto suffix = env_suffix(id);
  auto base = getenv_str("LLM_BASE_URL_" + suffix);
  if (!base) base = getenv_str("LLM_BASE_URL");
  auto key = getenv_str("LLM_API_KEY_" + suffix);
  if (!key) key = getenv_str("LLM_API_KEY");
  if (!base || !key) {
    throw Error(ErrorCode::ConfigInvalid, "backend '" + id + "' needs LLM_BASE_URL_" + suffix +
                                              " and LLM_API_KEY_" + suffix + " (or the unsuffixed forms)");
  }
  return std::make_unique<HttpChatBackend>(std::move(id), std::move(model), *base, *key);
}

AgentResponse HttpChatBackend::complete(const AgentRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  httplib::Client client(origin_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_bearer_token_auth(api_key_);

  Json body;
  body["model"] = model_;
  body["messages"] = Json::array({{{"role", "user"}, {"content", request.prompt}}});
  // Rough characters-per-token ratio for English and code.
  body["max_tokens"] = std::max<std::size_t>(256, request.max_output / 3);
  body["temperature"] = 0;

  auto res = client.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::TransientFailure, id_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error(ErrorCode::TransientFailure, id_ + ": HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::BackendFailure,
                id_ + ": HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 300));
  }
  AgentResponse out;
  out.backend_id = id_;
  try {
    const auto j = Json::parse(res->body);
    out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      out.usage = TokenUsage{j["usage"].value("prompt_tokens", 0L),
                             j["usage"].value("completion_tokens", 0L)};
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::TransientFailure, id_ + ": malformed completion: " + e.what());
  }
  if (out.text.size() > request.max_output) out.text.resize(request.max_output);
  out.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(GatewayOptions options) : options_(std::move(options)) {
  if (!options_.transcript_path.empty()) {
    if (options_.transcript_path.has_parent_path())
      std::filesystem::create_directories(options_.transcript_path.parent_path());
    transcript_out_.open(options_.transcript_path, std::ios::app);
    if (!transcript_out_)
      throw Error(ErrorCode::FileUnreadable,
                  "cannot open transcript " + options_.transcript_path.string());
  }
}

Gateway::~Gateway() = default;

void Gateway::register_backend(std::unique_ptr<Backend> backend) {
  const auto id = backend->id();
  const auto limit = std::clamp(options_.max_in_flight_per_backend, 1, 256);
  std::lock_guard lock(mu_);
  backends_[id] = Slot{std::move(backend), std::make_unique<std::counting_semaphore<256>>(limit)};
}

bool Gateway::has_backend(const std::string& id) const {
  std::lock_guard lock(mu_);
  return backends_.contains(id);
}

std::vector<std::string> Gateway::backend_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : backends_) out.push_back(id);
  return out;
}

bool Gateway::any_live_backend() const {
  std::lock_guard lock(mu_);
  for (const auto& [_, slot] : backends_)
    if (slot.backend->is_live()) return true;
  return false;
}

std::size_t Gateway::requests_used() const {
  std::lock_guard lock(mu_);
  return used_;
}

std::vector<Json> Gateway::transcript() const {
  std::lock_guard lock(mu_);
  return transcript_;
}

void Gateway::reserve_request(const AgentRequest& request) {
  std::lock_guard lock(mu_);
  if (used_ >= options_.max_requests) {
    throw Error(ErrorCode::BudgetExceeded,
                "request budget of " + std::to_string(options_.max_requests) +
                    " exhausted before role '" + request.role_id + "'");
  }
  ++used_;
}

void Gateway::log_attempt(const AgentRequest& request, const std::optional<AgentResponse>& response,
                          const std::string& error) {
  Json j;
  j["timestamp"] = utc_timestamp();
  j["role_id"] = request.role_id;
  j["backend_id"] = request.backend_id;
  j["attempt"] = request.attempt;
  j["prompt_digest"] = sha256_hex(request.prompt);
  j["prompt"] = request.prompt;
  if (response) {
    j["response"] = response->text;
    j["latency_ms"] = response->latency.count();
    if (response->usage) {
      j["usage"] = {{"prompt_tokens", response->usage->prompt_tokens},
                    {"completion_tokens", response->usage->completion_tokens}};
    }
  } else {
    j["error"] = error;
  }
  std::lock_guard lock(mu_);
  if (transcript_out_.is_open()) {
    transcript_out_ << j.dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
    transcript_out_.flush();
  }
  transcript_.push_back(std::move(j));
}

AgentResponse Gateway::complete(AgentRequest request) {
  if (request.prompt.empty())
    throw Error(ErrorCode::PreconditionViolation, "empty prompt for role '" + request.role_id + "'");
  Slot* slot = nullptr;
  {
    std::lock_guard lock(mu_);
    auto it = backends_.find(request.backend_id);
    if (it == backends_.end())
      throw Error(ErrorCode::UnknownBackend, "no backend '" + request.backend_id + "'");
    slot = &it->second;
  }

  auto delay = options_.backoff;
  std::string last_error;
  const int attempts = std::max(1, options_.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    request.attempt = attempt;
    reserve_request(request);
    slot->in_flight->acquire();
    try {
      auto response = slot->backend->complete(request);
      slot->in_flight->release();
      log_attempt(request, response, "");
      return response;
    } catch (const Error& e) {
      slot->in_flight->release();
      log_attempt(request, std::nullopt, e.what());
      if (e.code() != ErrorCode::TransientFailure) throw;
      last_error = e.what();
    } catch (const std::exception& e) {
      slot->in_flight->release();
      log_attempt(request, std::nullopt, e.what());
      throw Error(ErrorCode::BackendFailure, e.what());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw Error(ErrorCode::BackendFailure, "backend '" + request.backend_id + "' failed after " +
                                             std::to_string(attempts) + " attempts: " + last_error);
}

}  // namespace vulnpipe
