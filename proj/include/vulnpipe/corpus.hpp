#pragma once

// Unified record schema shared by every pipeline stage: CWE identifiers,
// vulnerability/fix pairs, content identities and whitespace-insensitive
// fingerprints, plus the JSONL interchange format.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vulnpipe {

using Json = nlohmann::ordered_json;

/// 256-bit SHA-256 digest.
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::string_view data);
std::string to_hex(const Digest& digest);
std::string sha256_hex(std::string_view data);
/// Digest of a file's bytes; throws FileUnreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

class CweId {
 public:
  explicit CweId(int number);

  /// Accepts "CWE-79", "cwe-79", " CWE-079 " and bare "79". Throws MalformedCwe.
  static CweId parse(std::string_view text);
  static std::optional<CweId> try_parse(std::string_view text) noexcept;

  int number() const noexcept { return number_; }
  std::string str() const;

  friend auto operator<=>(const CweId&, const CweId&) = default;

 private:
  int number_;
};

enum class Provenance { real, synthesized };

std::string_view to_string(Provenance p) noexcept;
Provenance parse_provenance(std::string_view text);

enum class Status {
  ingested,
  reconciled,
  deduped,
  filtered,
  verified,
  reviewed,
  benchmark,
  rejected,
  unverifiable,
};

std::string_view to_string(Status s) noexcept;
Status parse_status(std::string_view text);
bool is_terminal(Status s) noexcept;

bool is_valid_cve(std::string_view cve) noexcept;

/// Removes every code point carrying the Unicode White_Space property.
/// Bytes that are not valid UTF-8 are preserved untouched.
std::string normalize_code(std::string_view code);

/// Lowercase hex SHA-256 over source, 0x00, vuln_code, 0x00, fixed_code.
/// Throws EmptyCode if either code is empty.
std::string derive_id(std::string_view source, std::string_view vuln_code,
                      std::string_view fixed_code);

struct Fingerprint {
  Digest vuln_fp{};
  Digest fixed_fp{};

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
  friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i) h = (h << 8) | d[i];
    return h;
  }
};

struct FingerprintHash {
  std::size_t operator()(const Fingerprint& f) const noexcept {
    return DigestHash{}(f.vuln_fp) * 31 ^ DigestHash{}(f.fixed_fp);
  }
};

struct FunctionPair {
  std::string id;
  std::string source;
  std::optional<std::string> cve;
  std::vector<CweId> cwes;
  std::string language;
  std::optional<std::string> commit_message;
  std::string vuln_code;
  std::string fixed_code;
  Provenance provenance = Provenance::real;
  std::set<Status> status;
  /// Fields not part of the schema, preserved verbatim on round-trip.
  Json extra = Json::object();

  /// Builds a pair with a derived id and validates the schema invariants.
  static FunctionPair make(std::string source, std::string vuln_code, std::string fixed_code,
                           Provenance provenance = Provenance::real);

  /// Adds a status tag. Once a terminal tag is present only terminal tags may follow.
  void tag(Status s);
  bool has(Status s) const { return status.contains(s); }
  bool is_terminal() const;

  /// First CWE label, or std::nullopt for an unlabeled pair.
  std::optional<CweId> primary_cwe() const;
  /// Primary CWE rendered, or "none".
  std::string primary_cwe_key() const;

  /// Throws InvariantViolation when the record breaks a schema invariant.
  void validate() const;
};

Fingerprint fingerprint(const FunctionPair& pair);

Json to_json(const FunctionPair& pair);
/// Throws ParseFailure or InvariantViolation on malformed records.
FunctionPair pair_from_json(const Json& j);

std::vector<FunctionPair> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<FunctionPair>& pairs);

/// Digest over the sorted pair fingerprints of a corpus; order-independent.
std::string fingerprint_set_digest(const std::vector<FunctionPair>& pairs);

}  // namespace vulnpipe

template <>
struct std::hash<vulnpipe::CweId> {
  std::size_t operator()(const vulnpipe::CweId& c) const noexcept {
    return std::hash<int>{}(c.number());
  }
};
