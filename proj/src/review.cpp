#include "vulnpipe/review.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <mutex>
#include <set>

#include "vulnpipe/error.hpp"
#include "vulnpipe/shuffle.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace {

std::string iso_from_ms(std::int64_t ms) {
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

std::int64_t system_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Json to_json(const ReviewVerdict& v) {
  Json j{{"pair_id", v.pair_id},
         {"reviewer", v.reviewer},
         {"genuine", v.genuine},
         {"self_contained", v.self_contained},
         {"cwe_correct", v.cwe_correct},
         {"notes", v.notes ? Json(*v.notes) : Json(nullptr)},
         {"timestamp_ms", v.timestamp_ms},
         {"timestamp", iso_from_ms(v.timestamp_ms)}};
  return j;
}

ReviewVerdict verdict_from_json(const Json& j) {
  try {
    ReviewVerdict v;
    v.pair_id = j.at("pair_id").get<std::string>();
    v.reviewer = j.at("reviewer").get<std::string>();
    v.genuine = j.at("genuine").get<bool>();
    v.self_contained = j.at("self_contained").get<bool>();
    v.cwe_correct = j.at("cwe_correct").get<bool>();
    if (j.contains("notes") && !j["notes"].is_null()) v.notes = j["notes"].get<std::string>();
    if (j.contains("timestamp_ms")) v.timestamp_ms = j["timestamp_ms"].get<std::int64_t>();
    return v;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseFailure, std::string("malformed verdict: ") + e.what());
  }
}

double correctness(const std::vector<ReviewVerdict>& verdicts) {
  if (verdicts.empty()) throw Error(ErrorCode::NoVerdicts, "no verdicts recorded");
  const auto ok = std::count_if(verdicts.begin(), verdicts.end(), [](const ReviewVerdict& v) { return v.correct(); });
  return static_cast<double>(ok) / static_cast<double>(verdicts.size());
}

Json SessionManifest::to_json() const {
  return {{"pool", pool},
          {"seed", seed},
          {"reviewers", reviewers},
          {"reviews_per_pair", reviews_per_pair},
          {"per_reviewer", per_reviewer}};
}

SessionManifest SessionManifest::from_json(const Json& j) {
  try {
    SessionManifest m;
    m.pool = j.at("pool").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.reviewers = j.at("reviewers").get<std::vector<std::string>>();
    m.reviews_per_pair = j.value("reviews_per_pair", 1);
    m.per_reviewer = j.value("per_reviewer", std::size_t{0});
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("malformed session manifest: ") + e.what());
  }
}

void SessionManifest::validate() const {
  if (reviewers.empty()) throw Error(ErrorCode::ConfigInvalid, "review session needs at least one reviewer");
  if (std::set<std::string>(reviewers.begin(), reviewers.end()).size() != reviewers.size())
    throw Error(ErrorCode::ConfigInvalid, "reviewer ids must be unique");
  for (const auto& r : reviewers)
    if (r.empty()) throw Error(ErrorCode::ConfigInvalid, "reviewer id must not be empty");
  if (reviews_per_pair < 1 || static_cast<std::size_t>(reviews_per_pair) > reviewers.size())
    throw Error(ErrorCode::ConfigInvalid, "reviews per pair must be between 1 and the number of reviewers");
  if (std::set<std::string>(pool.begin(), pool.end()).size() != pool.size())
    throw Error(ErrorCode::ConfigInvalid, "review pool contains duplicate ids");
}

Assignments assign_pairs(const SessionManifest& m) {
  m.validate();
  auto order = m.pool;
  seeded_shuffle(order, m.seed);
  const auto k = m.reviewers.size();
  const auto copies = static_cast<std::size_t>(m.reviews_per_pair);
  if (m.per_reviewer > 0) order.resize(std::min(order.size(), m.per_reviewer * k / copies));
  Assignments out;
  for (const auto& r : m.reviewers) out[r];
  for (std::size_t c = 0; c < copies; ++c)
    for (std::size_t i = 0; i < order.size(); ++i) out[m.reviewers[(i + c) % k]].push_back(order[i]);
  return out;
}

ReviewSession::ReviewSession(SessionManifest manifest, std::vector<FunctionPair> pairs,
                             std::filesystem::path log_path, Clock clock)
    : manifest_(std::move(manifest)), log_path_(std::move(log_path)), clock_(clock ? std::move(clock) : system_ms) {
  assignments_ = assign_pairs(manifest_);
  for (auto& p : pairs) pairs_.emplace(p.id, std::move(p));
  for (const auto& id : manifest_.pool)
    if (!pairs_.contains(id)) throw Error(ErrorCode::ConfigInvalid, "pool id " + id + " has no pair record");

  if (log_path_.empty()) return;
  if (std::filesystem::exists(log_path_)) {
    std::ifstream in(log_path_, std::ios::binary);
    if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + log_path_.string());
    std::string line;
    std::size_t lineno = 0;
    std::uintmax_t good_end = 0;
    bool truncated = false;
    while (std::getline(in, line)) {
      ++lineno;
      const bool last_line = in.peek() == std::char_traits<char>::eof();
      if (!trim(line).empty()) {
        Json j;
        try {
          j = Json::parse(line);
        } catch (const Json::exception&) {
          // Only an interrupted final append may be malformed.
          if (!last_line) {
            throw Error(ErrorCode::InvariantViolation,
                        log_path_.string() + ":" + std::to_string(lineno) + " is corrupt");
          }
          truncated = true;
          break;
        }
        const auto v = verdict_from_json(j);
        check(v);
        apply(v);
      }
      good_end += line.size() + 1;
    }
    in.close();
    const auto size = std::filesystem::file_size(log_path_);
    if (truncated || good_end > size) std::filesystem::resize_file(log_path_, std::min(good_end, size));
    if (!truncated && good_end > size) {
      // Last record lacked its newline; restore it before appending.
      std::ofstream(log_path_, std::ios::app | std::ios::binary) << '\n';
    }
  }
  if (log_path_.has_parent_path()) std::filesystem::create_directories(log_path_.parent_path());
  log_.open(log_path_, std::ios::app | std::ios::binary);
  if (!log_) throw Error(ErrorCode::FileUnreadable, "cannot append to " + log_path_.string());
}

void ReviewSession::check(const ReviewVerdict& v) const {
  auto it = assignments_.find(v.reviewer);
  if (it == assignments_.end()) throw Error(ErrorCode::UnknownReviewer, "unknown reviewer '" + v.reviewer + "'");
  if (std::find(it->second.begin(), it->second.end(), v.pair_id) == it->second.end())
    throw Error(ErrorCode::NotAssigned, "pair " + v.pair_id + " is not assigned to " + v.reviewer);
  if (auto d = done_.find(v.reviewer); d != done_.end() && d->second.contains(v.pair_id))
    throw Error(ErrorCode::DuplicateVerdict, v.reviewer + " already reviewed " + v.pair_id);
}

void ReviewSession::apply(const ReviewVerdict& v) {
  done_[v.reviewer][v.pair_id] = verdicts_.size();
  last_timestamp_ = std::max(last_timestamp_, v.timestamp_ms);
  verdicts_.push_back(v);
}

std::optional<FunctionPair> ReviewSession::next_assignment(const std::string& reviewer) const {
  auto it = assignments_.find(reviewer);
  if (it == assignments_.end()) throw Error(ErrorCode::UnknownReviewer, "unknown reviewer '" + reviewer + "'");
  std::shared_lock lock(mu_);
  const auto d = done_.find(reviewer);
  for (const auto& id : it->second)
    if (d == done_.end() || !d->second.contains(id)) return pairs_.at(id);
  return std::nullopt;
}

ReviewVerdict ReviewSession::submit_verdict(ReviewVerdict v) {
  std::unique_lock lock(mu_);
  check(v);
  v.timestamp_ms = std::max(clock_(), last_timestamp_);
  if (log_.is_open()) {
    log_ << to_json(v).dump() << '\n';
    log_.flush();
    if (!log_) throw Error(ErrorCode::FileUnreadable, "cannot append to " + log_path_.string());
  }
  apply(v);
  return v;
}

ReviewProgress ReviewSession::progress(const std::optional<std::string>& reviewer) const {
  if (reviewer && !assignments_.contains(*reviewer))
    throw Error(ErrorCode::UnknownReviewer, "unknown reviewer '" + *reviewer + "'");
  std::shared_lock lock(mu_);
  ReviewProgress p;
  std::vector<ReviewVerdict> mine;
  for (const auto& [r, ids] : assignments_) {
    if (reviewer && r != *reviewer) continue;
    p.assigned += ids.size();
  }
  for (const auto& v : verdicts_)
    if (!reviewer || v.reviewer == *reviewer) mine.push_back(v);
  p.completed = mine.size();
  if (!mine.empty()) p.correctness = correctness(mine);
  return p;
}

std::optional<FunctionPair> ReviewSession::pair(const std::string& id) const {
  auto it = pairs_.find(id);
  if (it == pairs_.end()) return std::nullopt;
  return it->second;
}

std::vector<ReviewVerdict> ReviewSession::verdicts() const {
  std::shared_lock lock(mu_);
  return verdicts_;
}

// ---------------------------------------------------------------------------
// HTTP

struct ReviewServer::Impl {
  ReviewSession& session;
  httplib::Server server;
  int port = 0;

  explicit Impl(ReviewSession& s) : session(s) {}
};

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, Json::error_handler_t::replace), "application/json");
}

void send_error(httplib::Response& res, int status, const Error& e) {
  send_json(res, status, {{"error", to_string(e.code())}, {"message", e.what()}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownReviewer:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::NotAssigned: return 403;
    case ErrorCode::DuplicateVerdict: return 409;
    case ErrorCode::ParseFailure: return 400;
    default: return 500;
  }
}

Json progress_json(const ReviewProgress& p) {
  return {{"assigned", p.assigned},
          {"completed", p.completed},
          {"correctness", p.correctness ? Json(*p.correctness) : Json(nullptr)}};
}

}  // namespace

ReviewServer::ReviewServer(ReviewSession& session, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(session)) {
  auto& srv = impl_->server;
  auto& s = impl_->session;

  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), e);
      } catch (const std::exception& e) {
        send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
      }
    };
  };

  srv.Get("/api/pairs/next", guarded([&s](const httplib::Request& req, httplib::Response& res) {
            if (!req.has_param("reviewer"))
              return send_json(res, 400, {{"error", "BadRequest"}, {"message", "reviewer parameter required"}});
            if (auto p = s.next_assignment(req.get_param_value("reviewer")))
              return send_json(res, 200, to_json(*p));
            res.status = 204;
          }));
  srv.Get(R"(/api/pairs/([^/]+))", guarded([&s](const httplib::Request& req, httplib::Response& res) {
            if (auto p = s.pair(req.matches[1])) return send_json(res, 200, to_json(*p));
            send_json(res, 404, {{"error", "NotFound"}, {"message", "no pair " + std::string(req.matches[1])}});
          }));
  srv.Post("/api/verdicts", guarded([&s](const httplib::Request& req, httplib::Response& res) {
             Json body;
             try {
               body = Json::parse(req.body);
             } catch (const Json::exception& e) {
               throw Error(ErrorCode::ParseFailure, std::string("body is not JSON: ") + e.what());
             }
             auto v = verdict_from_json(body);
             send_json(res, 201, to_json(s.submit_verdict(std::move(v))));
           }));
  srv.Get("/api/progress", guarded([&s](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> reviewer;
            if (req.has_param("reviewer")) reviewer = req.get_param_value("reviewer");
            send_json(res, 200, progress_json(s.progress(reviewer)));
          }));
  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir.string()))
      throw Error(ErrorCode::ConfigInvalid, "static directory " + static_dir.string() + " does not exist");
  }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    impl_->port = srv.bind_to_any_port(host);
  } else {
    impl_->port = srv.bind_to_port(host, port) ? port : -1;
  }
  if (impl_->port < 0) throw Error(ErrorCode::ConfigInvalid, "cannot bind " + host + ":" + std::to_string(port));
  return impl_->port;
}

void ReviewServer::listen() { impl_->server.listen_after_bind(); }
void ReviewServer::stop() { impl_->server.stop(); }
void ReviewServer::wait_until_ready() { impl_->server.wait_until_ready(); }

}  // namespace vulnpipe
