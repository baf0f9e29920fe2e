#include "vulnpipe/nvd.hpp"

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

// ---------------------------------------------------------------------------
// HTTP source

HttpNvdSource::HttpNvdSource(std::string base_url, std::optional<std::string> api_key,
                             std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {}

NvdAnswer parse_nvd_response(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::TransientFailure, std::string("NVD: unparseable body: ") + e.what());
  }
  NvdAnswer answer;
  const auto vulns = j.value("vulnerabilities", Json::array());
  if (j.value("totalResults", vulns.size()) == 0 || vulns.empty()) return answer;
  answer.found = true;
  for (const auto& v : vulns) {
    const auto& cve = v.contains("cve") ? v["cve"] : v;
    for (const auto& w : cve.value("weaknesses", Json::array())) {
      for (const auto& d : w.value("description", Json::array())) {
        const auto value = d.value("value", std::string{});
        if (value.empty()) continue;
        if (std::find(answer.values.begin(), answer.values.end(), value) == answer.values.end())
          answer.values.push_back(value);
      }
    }
  }
  return answer;
}

NvdAnswer HttpNvdSource::query(const std::string& cve) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers headers;
  if (api_key_) headers.emplace("apiKey", *api_key_);
  auto res = client.Get("/rest/json/cves/2.0", httplib::Params{{"cveId", cve}}, headers);
  if (!res) {
    throw Error(ErrorCode::TransientFailure,
                "NVD: request failed: " + httplib::to_string(res.error()));
  }
  if (res->status == 404) return {};
  if (res->status != 200) {
    throw Error(ErrorCode::TransientFailure, "NVD: HTTP " + std::to_string(res->status));
  }
  return parse_nvd_response(res->body);
}

// ---------------------------------------------------------------------------
// Cache

namespace {

std::int64_t system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

NvdCache::NvdCache(std::filesystem::path path, std::chrono::seconds ttl, Clock clock)
    : path_(std::move(path)), ttl_(ttl), clock_(clock ? std::move(clock) : Clock(system_now)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read NVD cache " + path_.string());
  std::string line;
  while (std::getline(in, line)) {
    auto j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;  // torn tail write
    CacheEntry e;
    e.cve = j.value("cve", std::string{});
    e.answer.found = j.value("status", std::string{}) == "found";
    e.answer.values = j.value("values", std::vector<std::string>{});
    e.fetched_at = j.value("fetched_at", std::int64_t{0});
    if (!e.cve.empty()) entries_[e.cve] = std::move(e);
  }
}

std::optional<CacheEntry> NvdCache::lookup(const std::string& cve) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(cve);
  if (it == entries_.end()) return std::nullopt;
  if (clock_() - it->second.fetched_at > ttl_.count()) return std::nullopt;
  return it->second;
}

void NvdCache::store(const std::string& cve, const NvdAnswer& answer) {
  std::lock_guard lock(mu_);
  CacheEntry e{cve, answer, clock_()};
  if (!path_.empty()) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::FileUnreadable, "cannot append NVD cache " + path_.string());
    Json j;
    j["cve"] = cve;
    j["status"] = answer.found ? "found" : "not_found";
    j["values"] = answer.values;
    j["fetched_at"] = e.fetched_at;
    out << j.dump() << '\n';
  }
  entries_[cve] = std::move(e);
}

std::size_t NvdCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Client

NvdClientOptions NvdClientOptions::public_defaults(bool have_api_key) {
  NvdClientOptions o;
  o.request_interval = std::chrono::milliseconds(have_api_key ? 600 : 6000);
  return o;
}

NvdClient::NvdClient(NvdSource& source, NvdCache& cache, NvdClientOptions options)
    : source_(source), cache_(cache), options_(options),
      in_flight_(std::clamp(options.max_in_flight, 1, 64)) {
  options_.max_in_flight = std::clamp(options_.max_in_flight, 1, 64);
}

std::size_t NvdClient::network_requests() const {
  std::lock_guard lock(pace_mu_);
  return requests_;
}

void NvdClient::pace() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(pace_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + options_.request_interval;
    ++requests_;
  }
  std::this_thread::sleep_until(slot);
}

NvdAnswer NvdClient::query_with_retries(const std::string& cve) {
  std::string last_error;
  auto delay = options_.backoff;
  for (int attempt = 1; attempt <= std::max(1, options_.max_attempts); ++attempt) {
    in_flight_.acquire();
    try {
      pace();
      auto answer = source_.query(cve);
      in_flight_.release();
      return answer;
    } catch (const Error& e) {
      in_flight_.release();
      if (e.code() != ErrorCode::TransientFailure) throw;
      last_error = e.what();
    } catch (...) {
      in_flight_.release();
      throw;
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw Error(ErrorCode::NvdUnavailable, cve + ": " + last_error);
}

NvdRecord NvdClient::fetch(const std::string& cve) {
  if (!is_valid_cve(cve)) throw Error(ErrorCode::MalformedCve, "malformed CVE '" + cve + "'");

  NvdAnswer answer;
  if (auto hit = cache_.lookup(cve)) {
    answer = std::move(hit->answer);
  } else {
    answer = query_with_retries(cve);
    cache_.store(cve, answer);
  }
  if (!answer.found) throw Error(ErrorCode::NotFound, cve + " is unknown to the NVD");

  NvdRecord rec;
  for (const auto& v : answer.values) {
    if (starts_with_ci(v, "CWE-")) {
      if (auto c = CweId::try_parse(v)) {
        if (std::find(rec.cwes.begin(), rec.cwes.end(), *c) == rec.cwes.end())
          rec.cwes.push_back(*c);
        continue;
      }
    }
    rec.categories.push_back(v);
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Reconciliation

const MismatchCounts* MismatchReport::find(const std::string& source) const {
  for (const auto& [s, c] : per_source)
    if (s == source) return &c;
  return nullptr;
}

std::string MismatchReport::to_csv() const {
  std::ostringstream os;
  os << "source,matched,mismatched_corrected,cve_absent,nvd_unresolved\n";
  for (const auto& [s, c] : per_source) {
    os << csv_field(s) << ',' << c.matched << ',' << c.mismatched_corrected << ','
       << c.cve_absent << ',' << c.nvd_unresolved << '\n';
  }
  return os.str();
}

namespace {

enum class Resolution { resolved, unresolved, unavailable };

struct CveOutcome {
  Resolution resolution = Resolution::unresolved;
  std::vector<CweId> cwes;
};

bool same_labels(const std::vector<CweId>& a, const std::vector<CweId>& b) {
  return std::set<CweId>(a.begin(), a.end()) == std::set<CweId>(b.begin(), b.end());
}

}  // namespace

ReconcileResult reconcile(std::vector<FunctionPair> corpus, NvdClient& client,
                          const ReconcileOptions& options) {
  std::vector<std::string> cves;
  std::map<std::string, std::size_t> index;
  for (const auto& p : corpus) {
    if (p.cve && index.emplace(*p.cve, cves.size()).second) cves.push_back(*p.cve);
  }

  std::vector<CveOutcome> outcomes(cves.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr fatal;
  std::mutex fatal_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < cves.size(); i = next++) {
      try {
        auto rec = client.fetch(cves[i]);
        if (rec.cwes.empty()) {
          outcomes[i].resolution = Resolution::unresolved;
        } else {
          outcomes[i] = {Resolution::resolved, std::move(rec.cwes)};
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::NvdUnavailable) {
          outcomes[i].resolution = Resolution::unavailable;
        } else if (e.code() == ErrorCode::NotFound || e.code() == ErrorCode::MalformedCve) {
          outcomes[i].resolution = Resolution::unresolved;
        } else {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
        }
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
      }
    }
  };
  {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(client.max_in_flight()),
                                         std::max<std::size_t>(cves.size(), 1));
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  ReconcileResult result;
  std::map<std::string, std::size_t> slot;
  std::size_t with_cve = 0, unavailable = 0;
  for (auto& p : corpus) {
    auto [it, inserted] = slot.emplace(p.source, result.report.per_source.size());
    if (inserted) result.report.per_source.emplace_back(p.source, MismatchCounts{});
    auto& counts = result.report.per_source[it->second].second;

    if (!p.cve) {
      ++counts.cve_absent;
      continue;
    }
    ++with_cve;
    const auto& out = outcomes[index.at(*p.cve)];
    switch (out.resolution) {
      case Resolution::resolved:
        if (same_labels(p.cwes, out.cwes)) {
          ++counts.matched;
        } else {
          p.cwes = out.cwes;
          ++counts.mismatched_corrected;
          ++result.report.total_corrected;
        }
        break;
      case Resolution::unavailable:
        ++unavailable;
        [[fallthrough]];
      case Resolution::unresolved:
        ++counts.nvd_unresolved;
        break;
    }
    p.tag(Status::reconciled);
  }

  if (with_cve > 0 &&
      static_cast<double>(unavailable) > options.failure_budget * static_cast<double>(with_cve)) {
    throw Error(ErrorCode::NvdUnavailable,
                std::to_string(unavailable) + " of " + std::to_string(with_cve) +
                    " CVE-bearing records could not be fetched (budget " +
                    fixed(options.failure_budget * 100.0, 2) + "%)");
  }
  result.pairs = std::move(corpus);
  return result;
}

}  // namespace vulnpipe
