#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "modeshift/error.hpp"

namespace modeshift::csv {

using Row = std::vector<std::string>;

// RFC-4180 tokenizer: quoted fields may contain commas, doubled quotes and
// line breaks. CRLF and LF line endings are both accepted; a UTF-8 BOM at
// the start of the document is dropped.
inline std::vector<Row> parse(std::string_view text) {
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") {
    text.remove_prefix(3);
  }
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // Blank lines carry no record.
    if (!(row.size() == 1 && row.front().empty())) {
      rows.push_back(std::move(row));
    }
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char const c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field_started || field.empty()) {
          in_quotes = true;
        } else {
          field += c;
        }
        field_started = true;
        break;
      case ',': end_field(); break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') {
          ++i;
        }
        end_row();
        break;
      case '\n': end_row(); break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (in_quotes) {
    fail(ErrorCode::kFormat, "unterminated quoted field");
  }
  if (field_started || !field.empty() || !row.empty()) {
    end_row();
  }
  return rows;
}

inline std::string read_file(std::filesystem::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    fail(ErrorCode::kIo, "cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Header-driven view over a parsed table. Columns are looked up by name so
// the physical column order of the file is irrelevant.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<Row> rows) : name_{std::move(name)} {
    if (rows.empty()) {
      return;
    }
    header_ = std::move(rows.front());
    for (auto& h : header_) {
      auto const b = h.find_first_not_of(" \t");
      auto const e = h.find_last_not_of(" \t");
      h = b == std::string::npos ? std::string{} : h.substr(b, e - b + 1);
    }
    for (std::size_t i = 0; i < header_.size(); ++i) {
      index_.emplace(header_[i], i);
    }
    rows_.assign(std::make_move_iterator(rows.begin() + 1),
                 std::make_move_iterator(rows.end()));
  }

  static Table load(std::filesystem::path const& path) {
    return Table{path.filename().string(), parse(read_file(path))};
  }

  std::string const& name() const { return name_; }
  std::size_t size() const { return rows_.size(); }
  std::vector<std::string> const& header() const { return header_; }
  bool has(std::string const& column) const { return index_.contains(column); }

  std::optional<std::size_t> column(std::string const& name) const {
    auto const it = index_.find(name);
    if (it == index_.end()) {
      return std::nullopt;
    }
    return it->second;
  }

  std::size_t require(std::string const& name) const {
    auto const c = column(name);
    if (!c) {
      fail(ErrorCode::kFormat,
           name_ + ": missing required column '" + name + "'");
    }
    return *c;
  }

  // Missing trailing cells read as empty.
  std::string_view cell(std::size_t row, std::size_t col) const {
    auto const& r = rows_[row];
    return col < r.size() ? std::string_view{r[col]} : std::string_view{};
  }

  std::string_view cell(std::size_t row, std::optional<std::size_t> col) const {
    return col ? cell(row, *col) : std::string_view{};
  }

 private:
  std::string name_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Row> rows_;
};

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) {
    s.remove_suffix(1);
  }
  return s;
}

inline double to_double(std::string_view s, std::string const& where) {
  s = trim(s);
  double v{};
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    fail(ErrorCode::kFormat,
         where + ": expected a number, got '" + std::string{s} + "'");
  }
  return v;
}

inline long long to_int(std::string_view s, std::string const& where) {
  s = trim(s);
  long long v{};
  auto const [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    fail(ErrorCode::kFormat,
         where + ": expected an integer, got '" + std::string{s} + "'");
  }
  return v;
}

inline std::string quote(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string{s};
  }
  std::string out{"\""};
  for (char c : s) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  out += '"';
  return out;
}

// Fixed-precision rendering used by every CSV/JSON export, so byte-identical
// output follows from identical values.
inline std::string fixed(double v, int precision = 6) {
  char buf[64];
  if (v == 0.0) {
    v = 0.0;  // no "-0.000000"
  }
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                       std::chars_format::fixed, precision);
  if (ec != std::errc{}) {
    return "nan";
  }
  return std::string{buf, ptr};
}

// Shortest round-trip representation.
inline std::string shortest(double v) {
  char buf[64];
  if (v == 0.0) {
    v = 0.0;
  }
  auto const [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) {
    return "nan";
  }
  return std::string{buf, ptr};
}

class Writer {
 public:
  explicit Writer(std::filesystem::path const& path)
      : out_{path, std::ios::binary | std::ios::trunc}, path_{path} {
    if (!out_) {
      fail(ErrorCode::kIo, "cannot write " + path.string());
    }
  }

  template <typename... Cells>
  void row(Cells const&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << quote(to_cell(cells)), first = false), ...);
    out_ << '\n';
  }

  void row(std::vector<std::string> const& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out_ << (i == 0 ? "" : ",") << quote(cells[i]);
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (!out_) {
      fail(ErrorCode::kIo, "failed writing " + path_.string());
    }
  }

 private:
  static std::string to_cell(std::string const& s) { return s; }
  static std::string to_cell(std::string_view s) { return std::string{s}; }
  static std::string to_cell(char const* s) { return s; }
  static std::string to_cell(double v) { return fixed(v); }
  template <typename Int>
    requires std::is_integral_v<Int>
  static std::string to_cell(Int v) {
    return std::to_string(v);
  }

  std::ofstream out_;
  std::filesystem::path path_;
};

}  // namespace modeshift::csv
