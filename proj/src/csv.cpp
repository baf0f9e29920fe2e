#include "vulnpipe/csv.hpp"

#include "vulnpipe/error.hpp"

namespace vulnpipe::csv {

std::optional<Row> Reader::next() {
  if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;

  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char c;
  while (in_.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\r' && in_.peek() == '\n') {
      // CR of CRLF; the LF ends the record.
    } else if (c == '\n') {
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorCode::ParseFailure, "CSV: unterminated quoted field");
  row.push_back(std::move(field));
  return row;
}

}  // namespace vulnpipe::csv
