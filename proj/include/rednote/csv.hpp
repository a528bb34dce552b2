#ifndef REDNOTE_CSV_HPP
#define REDNOTE_CSV_HPP

#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "rednote/common.hpp"

namespace rednote::csv {

/// Streaming RFC-4180 reader. Quoted fields may contain commas, doubled
/// quotes and embedded CR/LF line breaks.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Reads the next record into `fields`. Returns false at end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    record_line_ = line_ + 1;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    for (;;) {
      const int ch = in_.get();
      if (ch == std::char_traits<char>::eof()) {
        if (quoted) {
          throw ParseError("unterminated quoted field starting on line " +
                               std::to_string(record_line_),
                           record_line_);
        }
        fields.push_back(std::move(field));
        ++line_;
        return true;
      }
      const char c = static_cast<char>(ch);
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (c == '\n' || c == '\r') {
        if (c == '\r' && in_.peek() == '\n') in_.get();
        fields.push_back(std::move(field));
        ++line_;
        return true;
      } else if (c == '"' && field.empty() && !after_quote) {
        quoted = true;
      } else if (after_quote) {
        throw ParseError("unexpected character after closing quote on line " +
                             std::to_string(line_ + 1),
                         line_ + 1);
      } else {
        field.push_back(c);
      }
    }
  }

  /// Physical line on which the most recent record started (1-based).
  std::size_t record_line() const noexcept { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Joins fields into one CRLF-terminated record.
inline std::string record(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out += "\r\n";
  return out;
}

}  // namespace rednote::csv

#endif  // REDNOTE_CSV_HPP
