#include "vulnpipe/corpus.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <memory>
#include <regex>

#include "vulnpipe/error.hpp"
#include "vulnpipe/text.hpp"

namespace vulnpipe {

Digest sha256(std::string_view data) {
  Digest out{};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), out.data(), &len) != 1 || len != out.size()) {
    throw std::runtime_error("sha256: OpenSSL digest failed");
  }
  return out;
}

std::string to_hex(const Digest& digest) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(digest.size() * 2);
  for (auto b : digest) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0x0f]);
  }
  return s;
}

std::string sha256_hex(std::string_view data) { return to_hex(sha256(data)); }

std::string sha256_file_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return sha256_hex(bytes);
}

// ---------------------------------------------------------------------------
// CweId

CweId::CweId(int number) : number_(number) {
  if (number < 1) throw Error(ErrorCode::MalformedCwe, "CWE number must be >= 1");
}

std::optional<CweId> CweId::try_parse(std::string_view text) noexcept {
  auto t = trim(text);
  if (t.size() >= 4 && (t[0] == 'C' || t[0] == 'c') && (t[1] == 'W' || t[1] == 'w') &&
      (t[2] == 'E' || t[2] == 'e') && t[3] == '-') {
    t.remove_prefix(4);
  }
  if (t.empty() || t.size() > 9) return std::nullopt;
  int n = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
  if (ec != std::errc{} || ptr != t.data() + t.size() || n < 1) return std::nullopt;
  return CweId(n);
}

CweId CweId::parse(std::string_view text) {
  if (auto c = try_parse(text)) return *c;
  throw Error(ErrorCode::MalformedCwe, "malformed CWE: '" + std::string(text) + "'");
}

std::string CweId::str() const { return "CWE-" + std::to_string(number_); }

// ---------------------------------------------------------------------------
// Enums

std::string_view to_string(Provenance p) noexcept {
  return p == Provenance::real ? "real" : "synthesized";
}

Provenance parse_provenance(std::string_view text) {
  if (text == "real") return Provenance::real;
  if (text == "synthesized") return Provenance::synthesized;
  throw Error(ErrorCode::ParseFailure, "unknown provenance '" + std::string(text) + "'");
}

namespace {
constexpr std::array<std::pair<Status, std::string_view>, 9> kStatusNames{{
    {Status::ingested, "ingested"},
    {Status::reconciled, "reconciled"},
    {Status::deduped, "deduped"},
    {Status::filtered, "filtered"},
    {Status::verified, "verified"},
    {Status::reviewed, "reviewed"},
    {Status::benchmark, "benchmark"},
    {Status::rejected, "rejected"},
    {Status::unverifiable, "unverifiable"},
}};
}  // namespace

std::string_view to_string(Status s) noexcept {
  for (const auto& [st, name] : kStatusNames)
    if (st == s) return name;
  return "unknown";
}

Status parse_status(std::string_view text) {
  for (const auto& [st, name] : kStatusNames)
    if (name == text) return st;
  throw Error(ErrorCode::ParseFailure, "unknown status '" + std::string(text) + "'");
}

bool is_terminal(Status s) noexcept {
  return s == Status::rejected || s == Status::unverifiable;
}

bool is_valid_cve(std::string_view cve) noexcept {
  static const std::regex re(R"(CVE-\d{4}-\d{4,})");
  return std::regex_match(cve.begin(), cve.end(), re);
}

// ---------------------------------------------------------------------------
// Normalization and identity

namespace {

bool is_white_space(char32_t cp) noexcept {
  return (cp >= 0x09 && cp <= 0x0D) || cp == 0x20 || cp == 0x85 || cp == 0xA0 ||
         cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x2028 || cp == 0x2029 ||
         cp == 0x202F || cp == 0x205F || cp == 0x3000;
}

// Length of the well-formed UTF-8 sequence at s[i], with its code point; 0 if malformed.
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

}  // namespace

std::string normalize_code(std::string_view code) {
  std::string out;
  out.reserve(code.size());
  std::size_t i = 0;
  while (i < code.size()) {
    char32_t cp = 0;
    const std::size_t len = decode_utf8(code, i, cp);
    if (len == 0) {
      out.push_back(code[i]);
      ++i;
      continue;
    }
    if (!is_white_space(cp)) out.append(code.substr(i, len));
    i += len;
  }
  return out;
}

std::string derive_id(std::string_view source, std::string_view vuln_code,
                      std::string_view fixed_code) {
  if (vuln_code.empty() || fixed_code.empty())
    throw Error(ErrorCode::EmptyCode, "vuln_code and fixed_code must be non-empty");
  std::string buf;
  buf.reserve(source.size() + vuln_code.size() + fixed_code.size() + 2);
  buf.append(source);
  buf.push_back('\0');
  buf.append(vuln_code);
  buf.push_back('\0');
  buf.append(fixed_code);
  return sha256_hex(buf);
}

Fingerprint fingerprint(const FunctionPair& pair) {
  return {sha256(normalize_code(pair.vuln_code)), sha256(normalize_code(pair.fixed_code))};
}

// ---------------------------------------------------------------------------
// FunctionPair

FunctionPair FunctionPair::make(std::string source, std::string vuln_code,
                                std::string fixed_code, Provenance provenance) {
  FunctionPair p;
  p.id = derive_id(source, vuln_code, fixed_code);
  p.source = std::move(source);
  p.vuln_code = std::move(vuln_code);
  p.fixed_code = std::move(fixed_code);
  p.provenance = provenance;
  return p;
}

bool FunctionPair::is_terminal() const {
  return has(Status::rejected) || has(Status::unverifiable);
}

void FunctionPair::tag(Status s) {
  if (is_terminal() && !vulnpipe::is_terminal(s) && !has(s)) {
    throw Error(ErrorCode::InvariantViolation,
                "pair " + id + " is terminal; cannot add status " + std::string(to_string(s)));
  }
  status.insert(s);
}

std::optional<CweId> FunctionPair::primary_cwe() const {
  if (cwes.empty()) return std::nullopt;
  return cwes.front();
}

std::string FunctionPair::primary_cwe_key() const {
  auto c = primary_cwe();
  return c ? c->str() : "none";
}

void FunctionPair::validate() const {
  auto fail = [this](const std::string& why) {
    throw Error(ErrorCode::InvariantViolation, "pair " + id + ": " + why);
  };
  if (vuln_code.empty() || fixed_code.empty()) fail("empty code");
  if (id != derive_id(source, vuln_code, fixed_code)) fail("id does not match content");
  if (provenance == Provenance::synthesized && cve) fail("synthesized pair carries a CVE");
  if (cve && !is_valid_cve(*cve)) fail("malformed CVE '" + *cve + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace {
constexpr std::array<std::string_view, 10> kSchemaFields{
    "id", "source", "cve", "cwes", "language", "commit_message",
    "vuln_code", "fixed_code", "provenance", "status"};
}

Json to_json(const FunctionPair& p) {
  Json j;
  j["id"] = p.id;
  j["source"] = p.source;
  j["cve"] = p.cve ? Json(*p.cve) : Json(nullptr);
  Json cwes = Json::array();
  for (const auto& c : p.cwes) cwes.push_back(c.str());
  j["cwes"] = std::move(cwes);
  j["language"] = p.language;
  j["commit_message"] = p.commit_message ? Json(*p.commit_message) : Json(nullptr);
  j["vuln_code"] = p.vuln_code;
  j["fixed_code"] = p.fixed_code;
  j["provenance"] = std::string(to_string(p.provenance));
  Json status = Json::array();
  for (auto s : p.status) status.push_back(std::string(to_string(s)));
  j["status"] = std::move(status);
  for (const auto& [k, v] : p.extra.items()) j[k] = v;
  return j;
}

FunctionPair pair_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseFailure, "record is not a JSON object");
  auto str = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string())
      throw Error(ErrorCode::ParseFailure, std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
  };
  auto opt_str = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    if (!j[key].is_string())
      throw Error(ErrorCode::ParseFailure, std::string("field '") + key + "' is not a string");
    return j[key].get<std::string>();
  };

  FunctionPair p;
  p.source = str("source");
  p.vuln_code = str("vuln_code");
  p.fixed_code = str("fixed_code");
  p.cve = opt_str("cve");
  p.commit_message = opt_str("commit_message");
  p.language = j.contains("language") && j["language"].is_string()
                   ? j["language"].get<std::string>()
                   : std::string{};
  if (j.contains("cwes") && j["cwes"].is_array()) {
    for (const auto& c : j["cwes"]) {
      if (!c.is_string()) throw Error(ErrorCode::MalformedCwe, "cwes entry is not a string");
      p.cwes.push_back(CweId::parse(c.get<std::string>()));
    }
  }
  p.provenance = j.contains("provenance") ? parse_provenance(j["provenance"].get<std::string>())
                                          : Provenance::real;
  if (j.contains("status") && j["status"].is_array()) {
    for (const auto& s : j["status"]) p.status.insert(parse_status(s.get<std::string>()));
  }
  p.id = derive_id(p.source, p.vuln_code, p.fixed_code);
  if (j.contains("id") && j["id"].is_string() && j["id"].get<std::string>() != p.id) {
    throw Error(ErrorCode::InvariantViolation,
                "record id " + j["id"].get<std::string>() + " does not match its content");
  }
  for (const auto& [k, v] : j.items()) {
    if (std::find(kSchemaFields.begin(), kSchemaFields.end(), k) == kSchemaFields.end())
      p.extra[k] = v;
  }
  p.validate();
  return p;
}

std::vector<FunctionPair> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileUnreadable, "cannot read " + path.string());
  std::vector<FunctionPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(pair_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ParseFailure,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<FunctionPair>& pairs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FileUnreadable, "cannot write " + path.string());
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::string fingerprint_set_digest(const std::vector<FunctionPair>& pairs) {
  std::vector<Fingerprint> fps;
  fps.reserve(pairs.size());
  for (const auto& p : pairs) fps.push_back(fingerprint(p));
  std::sort(fps.begin(), fps.end());
  std::string buf;
  buf.reserve(fps.size() * 64);
  for (const auto& f : fps) {
    buf.append(reinterpret_cast<const char*>(f.vuln_fp.data()), f.vuln_fp.size());
    buf.append(reinterpret_cast<const char*>(f.fixed_fp.data()), f.fixed_fp.size());
  }
  return sha256_hex(buf);
}

}  // namespace vulnpipe
