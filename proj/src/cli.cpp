#include "vulnpipe/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "vulnpipe/agents.hpp"
#include "vulnpipe/benchmark.hpp"
#include "vulnpipe/dedup.hpp"
#include "vulnpipe/error.hpp"
#include "vulnpipe/ingest.hpp"
#include "vulnpipe/llm.hpp"
#include "vulnpipe/nvd.hpp"
#include "vulnpipe/reporting.hpp"
#include "vulnpipe/review.hpp"
#include "vulnpipe/rvg.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace fs = std::filesystem;

namespace {

Error config_error(const std::string& message) { return Error(ErrorCode::ConfigInvalid, message); }

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_exists(const fs::path& p, const std::string& what) {
  if (!p.empty() && !fs::exists(p)) throw config_error(what + " " + p.string() + " does not exist");
}

std::vector<std::string> comma_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : split(s, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

/// Splits "name=value"; a bare value yields an empty name.
std::pair<std::string, std::string> named(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"", arg};
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
  static const std::set<std::string> kKeys{
      "priority",    "adapters",  "backends",     "curation_backend", "synth_backend", "validator_backend",
      "consensus_threshold", "quota", "top25", "seed", "max_requests", "workers", "output_dir",
      "prompts_dir", "nvd_cache", "nvd_base_url", "nvd_interval_ms"};
  if (!j.is_object()) throw config_error("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kKeys.contains(key)) throw config_error("unknown config key '" + key + "'");
  RunConfig c;
  try {
    c.priority = j.value("priority", std::vector<std::string>{});
    if (j.contains("adapters"))
      for (const auto& [name, path] : j["adapters"].items()) c.adapters[name] = path.get<std::string>();
    if (j.contains("backends")) {
      for (const auto& b : j["backends"]) {
        BackendSpec spec;
        spec.id = b.at("id").get<std::string>();
        spec.kind = b.value("kind", std::string("scripted"));
        spec.script = b.value("script", std::string());
        spec.model = b.value("model", std::string());
        c.backends.push_back(std::move(spec));
      }
    }
    c.curation_backend = j.value("curation_backend", std::string());
    c.synth_backend = j.value("synth_backend", std::string());
    c.validator_backend = j.value("validator_backend", std::string());
    c.consensus_threshold = j.value("consensus_threshold", 2);
    c.quota = j.value("quota", std::size_t{50});
    c.top25_path = j.value("top25", std::string());
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw config_error("seed must be a non-negative 64-bit integer");
      c.seed = j["seed"].get<std::uint64_t>();
    }
    c.max_requests = j.value("max_requests", std::size_t{10000});
    c.workers = j.value("workers", 1);
    c.output_dir = j.value("output_dir", std::string("out"));
    c.prompts_dir = j.value("prompts_dir", std::string());
    c.nvd_cache = j.value("nvd_cache", std::string());
    c.nvd_base_url = j.value("nvd_base_url", std::string());
    if (j.contains("nvd_interval_ms")) c.nvd_interval_ms = j["nvd_interval_ms"].get<std::int64_t>();
  } catch (const Json::exception& e) {
    throw config_error(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw config_error(path.string() + ": " + e.what());
  }
  auto c = from_json(j);
  // Relative paths in a config file are relative to the file.
  const auto base = path.parent_path();
  for (auto& [_, p] : c.adapters) p = resolve(base, p.string());
  for (auto& b : c.backends) b.script = resolve(base, b.script.string());
  c.top25_path = resolve(base, c.top25_path.string());
  c.output_dir = resolve(base, c.output_dir.string());
  c.prompts_dir = resolve(base, c.prompts_dir.string());
  c.nvd_cache = resolve(base, c.nvd_cache.string());
  return c;
}

void RunConfig::validate() const {
  if (consensus_threshold < 0 || consensus_threshold > 3) throw config_error("consensus threshold must be in 0..3");
  if (quota < 1) throw config_error("quota must be at least 1");
  if (workers < 1) throw config_error("workers must be at least 1");
  if (max_requests < 1) throw config_error("max_requests must be at least 1");
  if (nvd_interval_ms && *nvd_interval_ms < 0) throw config_error("nvd_interval_ms must be non-negative");
  if (std::set<std::string>(priority.begin(), priority.end()).size() != priority.size())
    throw config_error("priority list repeats a dataset");
  require_exists(top25_path, "top-25 list");
  require_exists(prompts_dir, "prompts directory");
  for (const auto& [name, p] : adapters) require_exists(p, "adapter for " + name);
  std::set<std::string> ids;
  for (const auto& b : backends) {
    if (b.id.empty()) throw config_error("backend id must not be empty");
    if (!ids.insert(b.id).second) throw config_error("duplicate backend id '" + b.id + "'");
    if (b.kind == "scripted") {
      if (b.script.empty()) throw config_error("scripted backend '" + b.id + "' needs a script");
      require_exists(b.script, "script for backend " + b.id);
    } else if (b.kind == "http") {
      if (b.model.empty()) throw config_error("http backend '" + b.id + "' needs a model");
    } else {
      throw config_error("backend '" + b.id + "' has unknown kind '" + b.kind + "'");
    }
  }
  for (const auto* role : {&curation_backend, &synth_backend, &validator_backend})
    if (!role->empty() && !ids.contains(*role)) throw config_error("backend '" + *role + "' is not defined");
}

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> inputs;
  std::string output;
  std::uint64_t seed = 0;
  int threshold = 2;
  std::size_t quota = 50;
  std::string priority;
  std::string format = "csv";
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string reviewers;
  int reviews_per_pair = 1;
  std::size_t per_reviewer = 0;
  std::string static_dir;
  std::vector<std::string> scripts;
  std::vector<std::string> http_backends;
  std::string curation_backend, synth_backend, validator_backend;
  int workers = 1;
  std::size_t max_requests = 10000;
  bool lenient = false;
  std::vector<std::string> synthesized;
  std::string training;
  std::string top25;
  std::string cwes;
  std::size_t samples = 100;
  std::string ratios;
  std::string prompts;
  std::string nvd_url;
  std::string nvd_cache;
};

/// Records what a stage read and wrote so runs can be chained and audited.
class StageManifest {
 public:
  StageManifest(std::string stage, fs::path dir) : stage_(std::move(stage)), dir_(std::move(dir)) {}

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void log(const fs::path& p) { logs_.push_back(p); }
  Json& parameters() { return params_; }
  Json& summary() { return summary_; }

  fs::path write() const {
    auto files = [](const std::vector<fs::path>& v) {
      Json arr = Json::array();
      for (const auto& p : v) arr.push_back({{"path", p.string()}, {"sha256", sha256_file_hex(p)}});
      return arr;
    };
    Json j{{"stage", stage_},
           {"created_at", utc_timestamp()},
           {"parameters", params_},
           {"inputs", files(inputs_)},
           {"outputs", files(outputs_)}};
    if (!logs_.empty()) {
      Json arr = Json::array();
      for (const auto& p : logs_) arr.push_back(p.string());
      j["logs"] = arr;
    }
    if (!summary_.is_null()) j["summary"] = summary_;
    const auto path = dir_ / (stage_ + ".manifest.json");
    std::ofstream(path) << j.dump(2) << '\n';
    return path;
  }

 private:
  std::string stage_;
  fs::path dir_;
  std::vector<fs::path> inputs_, outputs_, logs_;
  Json params_ = Json::object();
  Json summary_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  out << text;
}

std::vector<fs::path> input_paths(const Flags& f) {
  if (f.inputs.empty()) throw config_error("--input is required");
  std::vector<fs::path> out;
  for (const auto& i : f.inputs) {
    out.emplace_back(named(i).second);
    if (!fs::exists(out.back())) throw config_error("input " + out.back().string() + " does not exist");
  }
  return out;
}

std::vector<FunctionPair> read_all(const std::vector<fs::path>& paths, StageManifest& m) {
  std::vector<FunctionPair> out;
  for (const auto& p : paths) {
    m.input(p);
    auto part = read_jsonl(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

void emit(const fs::path& path, const std::vector<FunctionPair>& pairs, StageManifest& m) {
  write_jsonl(path, pairs);
  m.output(path);
}

std::vector<CweId> top25_list(const RunConfig& c) {
  return c.top25_path.empty() ? default_top25() : load_cwe_list(c.top25_path);
}

std::string role_backend(const RunConfig& c, const std::string& chosen, const std::string& role) {
  if (!chosen.empty()) return chosen;
  if (c.backends.size() == 1) return c.backends.front().id;
  throw config_error("no backend chosen for the " + role + " role");
}

std::unique_ptr<Gateway> make_gateway(const RunConfig& c, const std::string& stage, StageManifest& m) {
  GatewayOptions opts;
  opts.max_requests = c.max_requests;
  opts.transcript_path = c.output_dir / (stage + ".transcript.jsonl");
  fs::remove(opts.transcript_path);
  auto gw = std::make_unique<Gateway>(opts);
  for (const auto& b : c.backends) {
    if (b.kind == "scripted") {
      m.input(b.script);
      gw->register_backend(ScriptedBackend::load(b.id, b.script));
    } else {
      gw->register_backend(HttpChatBackend::from_env(b.id, b.model));
    }
  }
  m.log(opts.transcript_path);
  m.parameters()["backends"] = gw->backend_ids();
  return gw;
}

PromptSet prompt_set(const RunConfig& c) {
  return c.prompts_dir.empty() ? PromptSet::defaults() : PromptSet::load(c.prompts_dir);
}

// ---------------------------------------------------------------------------
// Stages

void stage_ingest(const RunConfig& c, const Flags& f, StageManifest& m) {
  if (f.inputs.empty()) throw config_error("--input is required");
  const auto mode = f.lenient ? LoadMode::lenient : LoadMode::strict;
  std::string report = "dataset,kind,row,field,message\n";
  Json counts = Json::object();
  for (const auto& arg : f.inputs) {
    auto [name, file] = named(arg);
    const fs::path path(file);
    if (!fs::exists(path)) throw config_error("input " + path.string() + " does not exist");
    if (name.empty()) name = to_lower(path.stem().string());
    fs::path adapter_path;
    if (auto it = c.adapters.find(name); it != c.adapters.end()) {
      adapter_path = it->second;
    } else {
      adapter_path = fs::path(VULNPIPE_DATA_DIR) / "adapters" / (name + ".json");
      if (!fs::exists(adapter_path)) throw config_error("no adapter for dataset '" + name + "'");
    }
    m.input(path);
    m.input(adapter_path);
    const auto adapter = AdapterConfig::load(adapter_path);
    const auto result = load_dataset(path, adapter, mode);
    for (const auto& [kind, list] : {std::pair{"error", &result.errors}, std::pair{"warning", &result.warnings}})
      for (const auto& e : *list)
        report += csv_field(adapter.dataset_name) + ',' + kind + ',' + std::to_string(e.row) + ',' + csv_field(e.field) +
                  ',' + csv_field(e.message) + '\n';
    emit(c.output_dir / (adapter.dataset_name + ".jsonl"), result.pairs, m);
    counts[adapter.dataset_name] = {{"pairs", result.pairs.size()}, {"row_errors", result.errors.size()},
                                    {"warnings", result.warnings.size()}};
  }
  const auto report_path = c.output_dir / "ingest_errors.csv";
  write_text(report_path, report);
  m.output(report_path);
  m.parameters()["mode"] = f.lenient ? "lenient" : "strict";
  m.summary() = counts;
}

void stage_nvd_sync(const RunConfig& c, const Flags& f, StageManifest& m) {
  const auto inputs = input_paths(f);
  const char* key = std::getenv("NVD_API_KEY");
  const bool have_key = key && *key;
  HttpNvdSource source(c.nvd_base_url.empty() ? HttpNvdSource::kDefaultBaseUrl : c.nvd_base_url,
                       have_key ? std::optional<std::string>(key) : std::nullopt);
  auto opts = NvdClientOptions::public_defaults(have_key);
  if (c.nvd_interval_ms) opts.request_interval = std::chrono::milliseconds(*c.nvd_interval_ms);
  const auto cache_path = c.nvd_cache.empty() ? c.output_dir / "nvd_cache.jsonl" : c.nvd_cache;
  NvdCache cache(cache_path);
  NvdClient client(source, cache, opts);

  std::string csv;
  std::size_t corrected = 0;
  for (const auto& path : inputs) {
    m.input(path);
    auto result = reconcile(read_jsonl(path), client);
    const auto report = result.report.to_csv();
    csv += csv.empty() ? report : report.substr(report.find('\n') + 1);
    corrected += result.report.total_corrected;
    emit(c.output_dir / path.filename(), result.pairs, m);
  }
  const auto report_path = c.output_dir / "nvd_mismatch.csv";
  write_text(report_path, csv);
  m.output(report_path);
  m.log(cache_path);
  m.parameters()["nvd_base_url"] = c.nvd_base_url.empty() ? HttpNvdSource::kDefaultBaseUrl : c.nvd_base_url;
  m.summary() = {{"total_corrected", corrected}, {"network_requests", client.network_requests()}};
}

void stage_dedup(const RunConfig& c, const Flags& f, StageManifest& m) {
  const auto all = read_all(input_paths(f), m);
  std::map<std::string, std::vector<FunctionPair>> corpora;
  std::vector<std::string> seen;
  for (const auto& p : all) {
    if (!corpora.contains(p.source)) seen.push_back(p.source);
    corpora[p.source].push_back(p);
  }
  const auto priority = c.priority.empty() ? seen : c.priority;
  const auto run = run_dedup_pipeline(corpora, priority);
  emit(c.output_dir / "deduped.jsonl", run.merged, m);

  const auto format = parse_table_format(f.format);
  const auto table_path = c.output_dir / (format == TableFormat::csv ? "dedup_report.csv" : "dedup_report.md");
  write_text(table_path, duplication_summary(run.reports).render(format));
  m.output(table_path);
  if (corpora.size() >= 2) {
    const auto overlap_path = c.output_dir / "overlap.csv";
    write_text(overlap_path, overlap_matrix(corpora, priority).to_csv());
    m.output(overlap_path);
  }
  m.parameters()["priority"] = priority;
  m.summary() = {{"input", all.size()}, {"merged", run.merged.size()}};
}

void stage_filter(const RunConfig& c, const Flags& f, StageManifest& m) {
  auto corpus = read_all(input_paths(f), m);
  auto gw = make_gateway(c, "filter", m);
  CurationOptions opts;
  opts.backend = role_backend(c, c.curation_backend, "curation");
  CurationAgents agents(*gw, opts, prompt_set(c));
  const auto result = filter_corpus(agents, std::move(corpus), c.workers);
  emit(c.output_dir / "filtered.jsonl", result.kept, m);
  emit(c.output_dir / "filter_dropped.jsonl", result.dropped, m);
  m.parameters()["backend"] = opts.backend;
  m.summary() = {{"kept", result.kept.size()}, {"dropped", result.dropped.size()}, {"requests", gw->requests_used()}};
}

void stage_verify(const RunConfig& c, const Flags& f, StageManifest& m) {
  auto corpus = read_all(input_paths(f), m);
  auto gw = make_gateway(c, "verify", m);
  CurationOptions opts;
  opts.backend = role_backend(c, c.curation_backend, "curation");
  CurationAgents agents(*gw, opts, prompt_set(c));
  const auto result = verify_corpus(agents, std::move(corpus), c.consensus_threshold, c.workers);
  emit(c.output_dir / "verified.jsonl", result.survivors, m);
  emit(c.output_dir / "verify_dropped.jsonl", result.dropped, m);
  std::string log;
  for (const auto& entry : result.log) log += to_json(entry).dump() + '\n';
  write_text(c.output_dir / "assessments.jsonl", log);
  m.output(c.output_dir / "assessments.jsonl");
  std::string failures = "pair_id,reason\n";
  for (const auto& fail : result.failures) failures += fail.pair_id + ',' + csv_field(fail.reason) + '\n';
  write_text(c.output_dir / "verify_failures.csv", failures);
  m.output(c.output_dir / "verify_failures.csv");
  m.parameters()["backend"] = opts.backend;
  m.parameters()["consensus_threshold"] = c.consensus_threshold;
  m.summary() = {{"survivors", result.survivors.size()},
                 {"dropped", result.dropped.size()},
                 {"unverifiable", result.failures.size()},
                 {"requests", gw->requests_used()}};
}

void stage_synthesize(const RunConfig& c, const Flags& f, StageManifest& m) {
  if (f.samples == 0) throw config_error("--samples must be at least 1");
  std::vector<CweId> cwes;
  if (!f.cwes.empty()) {
    for (const auto& t : comma_list(f.cwes)) cwes.push_back(CweId::parse(t));
  } else {
    cwes = top25_list(c);
  }
  auto gw = make_gateway(c, "synthesize", m);
  RvgOptions opts;
  opts.synth_backend = role_backend(c, c.synth_backend, "synthesis");
  if (c.validator_backend.empty()) throw config_error("synthesize needs a validator backend");
  RvgSynthesizer synth(*gw, opts, prompt_set(c));
  const auto results = synthesize_all(synth, cwes, f.samples, c.validator_backend, c.workers);

  std::vector<FunctionPair> accepted;
  std::vector<SynthesisReportRow> rows;
  std::string outcomes;
  for (const auto& [cwe, list] : results) {
    rows.push_back(summarize(cwe, list));
    for (const auto& o : list) {
      Json j{{"cwe", cwe.str()}, {"attempts", o.attempts}};
      j["context"] = o.context ? to_json(*o.context) : Json(nullptr);
      j["pair_id"] = o.pair ? Json(o.pair->id) : Json(nullptr);
      j["failure_reason"] = o.failure_reason ? Json(*o.failure_reason) : Json(nullptr);
      outcomes += j.dump() + '\n';
      if (o.pair) accepted.push_back(*o.pair);
    }
  }
  emit(c.output_dir / "synthesized.jsonl", accepted, m);
  write_text(c.output_dir / "synthesis_report.csv", synthesis_report_csv(rows));
  m.output(c.output_dir / "synthesis_report.csv");
  write_text(c.output_dir / "synthesis_outcomes.jsonl", outcomes);
  m.output(c.output_dir / "synthesis_outcomes.jsonl");
  std::vector<std::string> names;
  for (const auto& cwe : cwes) names.push_back(cwe.str());
  m.parameters()["cwes"] = names;
  m.parameters()["samples"] = f.samples;
  m.parameters()["synth_backend"] = opts.synth_backend;
  m.parameters()["validator_backend"] = c.validator_backend;
  m.summary() = {{"accepted", accepted.size()}, {"requests", gw->requests_used()}};
}

void stage_assemble(const RunConfig& c, const Flags& f, StageManifest& m) {
  const auto real = read_all(input_paths(f), m);
  std::vector<fs::path> synth_paths;
  for (const auto& s : f.synthesized) {
    synth_paths.emplace_back(s);
    require_exists(synth_paths.back(), "synthesized input");
  }
  const auto synth = read_all(synth_paths, m);
  const auto top25 = top25_list(c);
  const auto bench = assemble(real, synth, top25, c.quota);
  emit(c.output_dir / "benchmark.jsonl", bench, m);
  m.parameters()["quota"] = c.quota;
  m.summary() = benchmark_manifest(bench, top25, c.quota);

  if (!f.training.empty()) {
    const fs::path training_path(f.training);
    require_exists(training_path, "training input");
    m.input(training_path);
    const auto training = read_jsonl(training_path);
    std::string csv = "benchmark_id,training_id\n";
    const auto leaks = leakage_check(bench, training);
    for (const auto& [b, t] : leaks) csv += b + ',' + t + '\n';
    write_text(c.output_dir / "leakage.csv", csv);
    m.output(c.output_dir / "leakage.csv");
    emit(c.output_dir / "training_clean.jsonl", remove_leakage(training, bench), m);
    m.summary()["leaked_pairs"] = leaks.size();
  }
}

SplitRatios parse_ratios(const std::string& text) {
  if (text.empty()) return kDefaultRatios;
  const auto parts = comma_list(text);
  if (parts.size() != 3) throw config_error("--ratios needs three comma-separated values");
  SplitRatios r{};
  for (int k = 0; k < 3; ++k) {
    try {
      std::size_t used = 0;
      r[k] = std::stod(parts[k], &used);
      if (used != parts[k].size()) throw std::invalid_argument(parts[k]);
    } catch (const std::exception&) {
      throw config_error("bad ratio '" + parts[k] + "'");
    }
  }
  return r;
}

void stage_split(const RunConfig& c, const Flags& f, StageManifest& m) {
  const auto corpus = read_all(input_paths(f), m);
  const auto ratios = parse_ratios(f.ratios);
  const auto s = split_export(corpus, ratios, c.seed);
  emit(c.output_dir / "train.jsonl", s.train, m);
  emit(c.output_dir / "validation.jsonl", s.validation, m);
  emit(c.output_dir / "test.jsonl", s.test, m);
  m.parameters()["seed"] = c.seed;
  m.parameters()["ratios"] = ratios;
  m.summary() = split_manifest(s, ratios, c.seed);
}

void stage_stats(const RunConfig& c, const Flags& f, StageManifest& m, std::ostream& out) {
  const auto corpus = read_all(input_paths(f), m);
  const auto format = parse_table_format(f.format);
  const auto rows = cwe_distribution(corpus, top25_list(c));
  const auto table = render_distribution(rows, format);
  const auto path = c.output_dir / (format == TableFormat::csv ? "cwe_distribution.csv" : "cwe_distribution.md");
  write_text(path, table);
  m.output(path);
  out << table;

  std::vector<DistributionRow> top;
  for (const auto& r : rows)
    if (r.top25) top.push_back(r);
  Json summary{{"pairs", corpus.size()}, {"distinct_cwes", rows.size()}};
  if (!rows.empty()) {
    const auto ratio = imbalance_ratio(top.empty() ? rows : top);
    summary["imbalance_ratio"] = ratio;
    summary["imbalance_scope"] = top.empty() ? "all" : "top25";
    out << "imbalance ratio: " << ratio << '\n';
  }
  m.summary() = summary;
}

void stage_review_serve(const RunConfig& c, const Flags& f, StageManifest& m, CliContext& ctx) {
  auto pairs = read_all(input_paths(f), m);
  SessionManifest sm;
  for (const auto& p : pairs) sm.pool.push_back(p.id);
  sm.seed = c.seed;
  sm.reviewers = comma_list(f.reviewers);
  sm.reviews_per_pair = f.reviews_per_pair;
  sm.per_reviewer = f.per_reviewer;
  sm.validate();

  // A restarted session must keep its assignment; refuse a silently changed one.
  const auto session_path = c.output_dir / "review_session.json";
  if (fs::exists(session_path)) {
    std::ifstream in(session_path);
    const auto previous = Json::parse(in, nullptr, false);
    if (previous.is_discarded() || previous != sm.to_json())
      throw config_error(session_path.string() + " describes a different session; use a new output directory");
  } else {
    write_text(session_path, sm.to_json().dump(2) + "\n");
  }
  m.output(session_path);
  const auto log_path = c.output_dir / "verdicts.jsonl";
  m.log(log_path);
  m.parameters()["reviewers"] = sm.reviewers;
  m.parameters()["reviews_per_pair"] = sm.reviews_per_pair;
  m.parameters()["per_reviewer"] = sm.per_reviewer;
  m.parameters()["seed"] = sm.seed;

  ReviewSession session(sm, std::move(pairs), log_path);
  fs::path static_dir;
  if (!f.static_dir.empty()) {
    static_dir = f.static_dir;
    require_exists(static_dir, "static directory");
  }
  ReviewServer server(session, static_dir);
  const int port = server.bind(f.host, f.port);
  m.write();
  ctx.out << "review service listening on http://" << f.host << ':' << port << std::endl;
  std::thread runner([&] { server.listen(); });
  server.wait_until_ready();
  if (ctx.on_serving) ctx.on_serving(server, port);
  runner.join();
}

void apply_flags(RunConfig& c, const Flags& f, const CLI::App& app) {
  auto given = [&](const char* name) { return app.count(name) > 0; };
  if (given("--output")) c.output_dir = f.output;
  if (given("--seed")) c.seed = f.seed;
  if (given("--consensus-threshold")) c.consensus_threshold = f.threshold;
  if (given("--quota")) c.quota = f.quota;
  if (given("--priority")) c.priority = comma_list(f.priority);
  if (given("--workers")) c.workers = f.workers;
  if (given("--max-requests")) c.max_requests = f.max_requests;
  if (given("--top25")) c.top25_path = f.top25;
  if (given("--prompts")) c.prompts_dir = f.prompts;
  if (given("--nvd-url")) c.nvd_base_url = f.nvd_url;
  if (given("--nvd-cache")) c.nvd_cache = f.nvd_cache;
  if (given("--curation-backend")) c.curation_backend = f.curation_backend;
  if (given("--synth-backend")) c.synth_backend = f.synth_backend;
  if (given("--validator-backend")) c.validator_backend = f.validator_backend;
  auto upsert = [&](BackendSpec spec) {
    for (auto& b : c.backends)
      if (b.id == spec.id) return void(b = std::move(spec));
    c.backends.push_back(std::move(spec));
  };
  for (const auto& s : f.scripts) {
    auto [id, path] = named(s);
    if (id.empty()) throw config_error("--script expects id=path");
    upsert({id, "scripted", path, ""});
  }
  for (const auto& s : f.http_backends) {
    auto [id, model] = named(s);
    if (id.empty()) throw config_error("--http-backend expects id=model");
    upsert({id, "http", {}, model});
  }
}

int fail(CliContext& ctx, const std::string& stage, ErrorCode code, const std::string& message) {
  Json j{{"stage", stage}, {"error", std::string(to_string(code))}, {"message", stage + ": " + message}};
  ctx.err << j.dump() << std::endl;
  return code == ErrorCode::ConfigInvalid ? 2 : 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& raw_args, CliContext& ctx) {
  std::vector<std::string> args = raw_args;
  // "review serve" is accepted as a spelling of "review-serve".
  for (std::size_t i = 1; i + 1 < args.size(); ++i) {
    if (args[i] == "review" && args[i + 1] == "serve") {
      args[i] = "review-serve";
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      break;
    }
  }

  CLI::App app{"Vulnerability dataset curation pipeline", "vulnpipe"};
  app.fallthrough();
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; flags override its fields");
  app.add_option("-i,--input", f.inputs, "Input file(s); ingest takes name=path");
  app.add_option("-o,--output", f.output, "Output directory");
  app.add_option("--seed", f.seed, "64-bit seed");
  app.add_option("--consensus-threshold", f.threshold, "Minimum consensus score kept by verify (0..3)");
  app.add_option("--quota", f.quota, "Pairs per CWE in the benchmark");
  app.add_option("--priority", f.priority, "Comma-separated dataset priority for dedup");
  app.add_option("--format", f.format, "Table format: csv or markdown");
  app.add_option("--port", f.port, "Review service port (0 picks a free port)");
  app.add_option("--host", f.host, "Review service bind address");
  app.add_option("--reviewers", f.reviewers, "Comma-separated reviewer ids");
  app.add_option("--reviews-per-pair", f.reviews_per_pair, "Independent reviews per pair");
  app.add_option("--per-reviewer", f.per_reviewer, "Pairs per reviewer; 0 spreads the whole pool");
  app.add_option("--static", f.static_dir, "Directory served at / by the review service");
  app.add_option("--script", f.scripts, "Scripted backend id=fixture.jsonl");
  app.add_option("--http-backend", f.http_backends, "OpenAI-compatible backend id=model");
  app.add_option("--curation-backend", f.curation_backend, "Backend for filter and verify");
  app.add_option("--synth-backend", f.synth_backend, "Backend for synthesis roles");
  app.add_option("--validator-backend", f.validator_backend, "Backend for cross-validation");
  app.add_option("--workers", f.workers, "Concurrent pairs or CWEs");
  app.add_option("--max-requests", f.max_requests, "LLM request budget");
  app.add_flag("--lenient", f.lenient, "Skip bad rows during ingest instead of failing");
  app.add_option("--synthesized", f.synthesized, "Synthesized pairs for assemble");
  app.add_option("--training", f.training, "Training corpus to check for benchmark leakage");
  app.add_option("--top25", f.top25, "CWE list file");
  app.add_option("--cwes", f.cwes, "Comma-separated CWEs for synthesize");
  app.add_option("--samples", f.samples, "Samples per CWE for synthesize");
  app.add_option("--ratios", f.ratios, "train,validation,test ratios");
  app.add_option("--prompts", f.prompts, "Directory of prompt templates");
  app.add_option("--nvd-url", f.nvd_url, "NVD API base URL");
  app.add_option("--nvd-cache", f.nvd_cache, "NVD cache file");
  for (const auto& name : subcommand_names()) app.add_subcommand(name);

  std::vector<const char*> argv;
  argv.push_back(args.empty() ? "vulnpipe" : args[0].c_str());
  for (std::size_t i = 1; i < args.size(); ++i) argv.push_back(args[i].c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, ctx.out, ctx.err);
  } catch (const CLI::ParseError& e) {
    return fail(ctx, "cli", ErrorCode::ConfigInvalid, e.what());
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    RunConfig config = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
    apply_flags(config, f, app);
    config.validate();
    fs::create_directories(config.output_dir);

    StageManifest manifest(stage, config.output_dir);
    if (stage == "ingest") stage_ingest(config, f, manifest);
    else if (stage == "nvd-sync") stage_nvd_sync(config, f, manifest);
    else if (stage == "dedup") stage_dedup(config, f, manifest);
    else if (stage == "filter") stage_filter(config, f, manifest);
    else if (stage == "verify") stage_verify(config, f, manifest);
    else if (stage == "synthesize") stage_synthesize(config, f, manifest);
    else if (stage == "assemble") stage_assemble(config, f, manifest);
    else if (stage == "split") stage_split(config, f, manifest);
    else if (stage == "stats") stage_stats(config, f, manifest, ctx.out);
    else if (stage == "review-serve") return stage_review_serve(config, f, manifest, ctx), 0;
    const auto path = manifest.write();
    ctx.out << stage << ": wrote " << path.string() << '\n';
    return 0;
  } catch (const Error& e) {
    return fail(ctx, stage, e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ctx, stage, ErrorCode::InvariantViolation, e.what());
  }
}

}  // namespace vulnpipe
