#include "vulnpipe/ingest.hpp"

#include <fstream>
#include <functional>
#include <set>

#include "vulnpipe/csv.hpp"
#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

namespace {

const std::set<std::string> kMappableFields{"vuln_code",  "fixed_code",     "cve",
                                            "cwes",       "language",       "commit_message"};

CweParseRule parse_rule(std::string_view s) {
  if (s == "list") return CweParseRule::list;
  if (s == "single") return CweParseRule::single;
  if (s == "absent") return CweParseRule::absent;
  throw Error(ErrorCode::ConfigInvalid, "unknown cwe_parse_rule '" + std::string(s) + "'");
}

// Resolves a column name or a dotted key path inside a row object.
const Json* lookup(const Json& row, const std::string& key) {
  if (auto it = row.find(key); it != row.end()) return &*it;
  const Json* cur = &row;
  for (const auto& part : split(key, '.')) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(part);
    if (it == cur->end()) return nullptr;
    cur = &*it;
  }
  return cur;
}

bool is_blank(const Json& v) {
  if (v.is_null()) return true;
  if (v.is_string()) {
    const auto t = trim(v.get_ref<const std::string&>());
    return t.empty() || t == "nan" || t == "NaN" || t == "None" || t == "null";
  }
  if (v.is_array()) return v.empty();
  return false;
}

std::string as_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

AdapterConfig AdapterConfig::from_json(const Json& j) {
  AdapterConfig c;
  try {
    c.dataset_name = j.at("dataset_name").get<std::string>();
    for (const auto& [k, v] : j.at("field_map").items()) c.field_map[k] = v.get<std::string>();
    if (j.contains("language_default") && !j["language_default"].is_null())
      c.language_default = j["language_default"].get<std::string>();
    if (j.contains("cwe_parse_rule"))
      c.cwe_parse_rule = parse_rule(j["cwe_parse_rule"].get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("adapter config: ") + e.what());
  }
  c.validate();
  return c;
}

AdapterConfig AdapterConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read adapter " + path.string());
  try {
    return from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

void AdapterConfig::validate() const {
  if (dataset_name.empty()) throw Error(ErrorCode::ConfigInvalid, "dataset_name is empty");
  for (const char* required : {"vuln_code", "fixed_code"}) {
    if (!field_map.contains(required))
      throw Error(ErrorCode::ConfigInvalid,
                  dataset_name + ": field_map must map '" + required + "'");
  }
  for (const auto& [k, _] : field_map) {
    if (!kMappableFields.contains(k))
      throw Error(ErrorCode::ConfigInvalid, dataset_name + ": unknown unified field '" + k + "'");
  }
}

std::vector<CweId> parse_cwe_field(const Json& value, CweParseRule rule,
                                   std::vector<std::string>& bad) {
  std::vector<CweId> out;
  if (rule == CweParseRule::absent || is_blank(value)) return out;

  std::vector<std::string> tokens;
  if (value.is_array()) {
    for (const auto& v : value) tokens.push_back(as_text(v));
  } else if (rule == CweParseRule::single) {
    tokens.push_back(as_text(value));
  } else {
    std::string cur;
    for (char c : as_text(value)) {
      if (c == ',' || c == ';' || c == '|' || c == ' ' || c == '\t' || c == '\n') {
        tokens.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    tokens.push_back(cur);
  }

  for (auto& tok : tokens) {
    std::string_view t = trim(tok);
    while (!t.empty() && (t.front() == '[' || t.front() == '\'' || t.front() == '"')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == ']' || t.back() == '\'' || t.back() == '"')) t.remove_suffix(1);
    t = trim(t);
    if (t.empty()) continue;
    if (auto c = CweId::try_parse(t)) {
      if (std::find(out.begin(), out.end(), *c) == out.end()) out.push_back(*c);
    } else {
      bad.emplace_back(t);
    }
  }
  return out;
}

namespace {

class RowSink {
 public:
  RowSink(const AdapterConfig& config, LoadMode mode, LoadResult& result)
      : config_(config), mode_(mode), result_(result) {}

  void fail(std::size_t row, const std::string& field, const std::string& message) {
    if (mode_ == LoadMode::strict) {
      throw Error(ErrorCode::RowError, config_.dataset_name + " row " + std::to_string(row) +
                                           ": " + field + ": " + message);
    }
    result_.errors.push_back({row, field, message});
  }

  void warn(std::size_t row, const std::string& field, const std::string& message) {
    if (mode_ == LoadMode::strict) fail(row, field, message);
    result_.warnings.push_back({row, field, message});
  }

  void accept(std::size_t row, const Json& obj) {
    const Json* value = nullptr;
    auto field = [&](const std::string& name) -> const Json* {
      auto it = config_.field_map.find(name);
      if (it == config_.field_map.end()) return nullptr;
      const Json* v = lookup(obj, it->second);
      return (v && !is_blank(*v)) ? v : nullptr;
    };

    const Json* vuln = field("vuln_code");
    const Json* fixed = field("fixed_code");
    if (!vuln) return fail(row, "vuln_code", "missing or empty");
    if (!fixed) return fail(row, "fixed_code", "missing or empty");

    std::optional<std::string> cve;
    if ((value = field("cve"))) {
      std::string c = to_upper(trim(as_text(*value)));
      if (is_valid_cve(c)) {
        cve = std::move(c);
      } else {
        warn(row, "cve", "malformed CVE '" + c + "' dropped");
      }
    }

    std::vector<CweId> cwes;
    if ((value = field("cwes"))) {
      std::vector<std::string> bad;
      cwes = parse_cwe_field(*value, config_.cwe_parse_rule, bad);
      for (const auto& b : bad) warn(row, "cwes", "malformed CWE '" + b + "' dropped");
    }

    FunctionPair p = FunctionPair::make(config_.dataset_name, sanitize_utf8(as_text(*vuln)),
                                        sanitize_utf8(as_text(*fixed)));
    p.cve = std::move(cve);
    p.cwes = std::move(cwes);
    if ((value = field("language")))
      p.language = to_lower(trim(as_text(*value)));
    else
      p.language = to_lower(config_.language_default.value_or("unknown"));
    if ((value = field("commit_message"))) p.commit_message = sanitize_utf8(as_text(*value));
    p.tag(Status::ingested);
    result_.pairs.push_back(std::move(p));
  }

 private:
  const AdapterConfig& config_;
  LoadMode mode_;
  LoadResult& result_;
};

void check_schema(const AdapterConfig& config, const std::function<bool(const std::string&)>& present) {
  for (const auto& [field, key] : config.field_map) {
    if (!present(key)) {
      throw Error(ErrorCode::SchemaMismatch, config.dataset_name + ": mapped key '" + key +
                                                 "' (for " + field + ") absent in every row");
    }
  }
}

void load_csv(std::istream& in, const AdapterConfig& config, RowSink& sink) {
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header) return;
  if (!header->empty() && header->front().rfind("\xEF\xBB\xBF", 0) == 0)
    header->front().erase(0, 3);
  check_schema(config, [&](const std::string& key) {
    return std::find(header->begin(), header->end(), key) != header->end();
  });
  std::size_t row = 0;
  while (auto rec = reader.next()) {
    if (rec->size() == 1 && rec->front().empty()) continue;  // blank line
    ++row;
    if (rec->size() != header->size()) {
      sink.fail(row, "*", "expected " + std::to_string(header->size()) + " columns, got " +
                              std::to_string(rec->size()));
      continue;
    }
    Json obj = Json::object();
    for (std::size_t i = 0; i < header->size(); ++i) obj[(*header)[i]] = (*rec)[i];
    sink.accept(row, obj);
  }
}

void load_jsonl(const std::filesystem::path& path, const AdapterConfig& config, RowSink& sink) {
  std::set<std::string> seen;
  bool any_row = false;
  {
    std::ifstream pre(path, std::ios::binary);
    std::string line;
    while (std::getline(pre, line)) {
      if (trim(line).empty()) continue;
      auto obj = Json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object()) continue;
      any_row = true;
      for (const auto& [_, key] : config.field_map)
        if (lookup(obj, key)) seen.insert(key);
    }
  }
  if (any_row) check_schema(config, [&](const std::string& key) { return seen.contains(key); });

  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    auto obj = Json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      sink.fail(row, "*", "not a JSON object");
      continue;
    }
    sink.accept(row, obj);
  }
}

}  // namespace

LoadResult load_dataset(const std::filesystem::path& path, const AdapterConfig& config,
                        LoadMode mode) {
  config.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());

  LoadResult result;
  RowSink sink(config, mode, result);
  const auto ext = to_lower(path.extension().string());
  if (ext == ".csv") {
    load_csv(in, config, sink);
  } else if (ext == ".jsonl" || ext == ".ndjson" || ext == ".json") {
    in.close();
    load_jsonl(path, config, sink);
  } else {
    throw Error(ErrorCode::UnsupportedFormat, "unsupported dataset extension '" + ext + "'");
  }
  return result;
}

}  // namespace vulnpipe
