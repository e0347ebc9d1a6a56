#pragma once

// Minimal RFC 4180 reader/writer: quoted fields may contain separators,
// doubled quotes and newlines.

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mtlfilm/error.hpp"

namespace mtlfilm::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

inline std::vector<Row> parse(std::istream& in) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false, field_started = false, any = false;
  std::size_t line = 1;
  row.line = 1;
  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // A blank physical line yields a single empty field; skip it.
    if (!(row.fields.size() == 1 && row.fields[0].empty())) rows.push_back(std::move(row));
    row = Row{};
    row.line = line;
  };
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started && field.empty()) {
          in_quotes = true;
          field_started = true;
        } else {
          field += c;
        }
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_row();
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::kSchemaMismatch, "unterminated quoted field starting on line " +
                                                std::to_string(row.line));
  }
  if (any && (!field.empty() || !row.fields.empty())) end_row();
  return rows;
}

inline std::vector<Row> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
  return parse(in);
}

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (k) out << ',';
    out << escape(fields[k]);
  }
  out << '\n';
}

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace mtlfilm::csv
