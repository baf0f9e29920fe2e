#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace vulnpipe::csv {

using Row = std::vector<std::string>;

/// Streaming RFC 4180 reader: quoted fields may span lines and escape quotes by
/// doubling. Accepts LF or CRLF record terminators.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next record, or std::nullopt at end of input. Throws ParseFailure on an
  /// unterminated quoted field.
  std::optional<Row> next();

 private:
  std::istream& in_;
};

}  // namespace vulnpipe::csv
