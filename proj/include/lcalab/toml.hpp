#pragma once

// A small TOML reader covering what experiment configs use: comments, bare
// and quoted keys, dotted keys, [table] and [a.b] headers, [[array]] tables,
// basic and literal strings, integers, floats, booleans, multi-line arrays
// and inline tables. Dates and multi-line strings are not supported.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcalab/errors.hpp"

namespace lcalab::toml {

namespace detail {

class Parser {
 public:
  explicit Parser(std::string text) : s_(std::move(text)) {}

  nlohmann::json parse() {
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        table = header(root);
      } else {
        key_value(*table);
      }
      end_of_line();
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("toml line " + std::to_string(line_) + ": " + what);
  }
  bool eof() const { return pos_ >= s_.size(); }
  char peek() const { return eof() ? '\0' : s_[pos_]; }
  char get() {
    if (eof()) fail("unexpected end of input");
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    get();
  }
  void skip_spaces() {
    while (peek() == ' ' || peek() == '\t') get();
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }
  void skip_blank_lines() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r') get();
      if (peek() == '\n') {
        get();
        continue;
      }
      return;
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    for (;;) {
      skip_spaces();
      skip_comment();
      if (peek() == '\n' || peek() == '\r') {
        get();
        continue;
      }
      return;
    }
  }
  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') get();
    if (eof()) return;
    if (peek() != '\n') fail("unexpected text after value");
    get();
  }

  static bool bare_key_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string simple_key() {
    if (peek() == '"') return basic_string();
    if (peek() == '\'') return literal_string();
    std::string k;
    while (bare_key_char(peek())) k += get();
    if (k.empty()) fail("expected a key");
    return k;
  }

  std::vector<std::string> dotted_key() {
    std::vector<std::string> parts;
    for (;;) {
      skip_spaces();
      parts.push_back(simple_key());
      skip_spaces();
      if (peek() != '.') return parts;
      get();
    }
  }

  nlohmann::json* descend(nlohmann::json* t, const std::string& k) {
    auto& next = (*t)[k];
    if (next.is_null()) next = nlohmann::json::object();
    if (next.is_array() && !next.empty() && next.back().is_object()) return &next.back();
    if (!next.is_object()) fail("key '" + k + "' is not a table");
    return &next;
  }

  // The value at parts[0..i] (following the last element of arrays of tables).
  static const nlohmann::json& root_lookup(const nlohmann::json& root, const std::vector<std::string>& parts,
                                           std::size_t i) {
    const nlohmann::json* t = &root;
    for (std::size_t j = 0; j <= i; ++j) {
      if (t->is_array()) t = &t->back();
      t = &t->at(parts[j]);
    }
    return *t;
  }

  nlohmann::json* header(nlohmann::json& root) {
    expect('[');
    const bool array = peek() == '[';
    if (array) get();
    auto parts = dotted_key();
    expect(']');
    if (array) expect(']');
    nlohmann::json* t = &root;
    std::string path;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      t = descend(t, parts[i]);
      path += parts[i];
      const auto& here = root_lookup(root, parts, i);
      if (here.is_array()) path += "[" + std::to_string(here.size() - 1) + "]";
      path += '.';
    }
    path += parts.back();
    auto& last = (*t)[parts.back()];
    if (array) {
      if (last.is_null()) last = nlohmann::json::array();
      if (!last.is_array()) fail("'" + parts.back() + "' is not an array of tables");
      last.push_back(nlohmann::json::object());
      return &last.back();
    }
    if (last.is_null()) {
      last = nlohmann::json::object();
    } else if (!last.is_object()) {
      fail("'" + parts.back() + "' is not a table");
    } else if (defined_.count(path)) {
      fail("table '" + path + "' defined twice");
    }
    defined_.insert(path);
    return &last;
  }

  void key_value(nlohmann::json& table) {
    auto parts = dotted_key();
    skip_spaces();
    expect('=');
    skip_spaces();
    nlohmann::json* t = &table;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = descend(t, parts[i]);
    if (t->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
    (*t)[parts.back()] = value();
  }

  nlohmann::json value() {
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return number();
  }

  nlohmann::json array() {
    expect('[');
    nlohmann::json a = nlohmann::json::array();
    for (;;) {
      skip_array_space();
      if (peek() == ']') break;
      a.push_back(value());
      skip_array_space();
      if (peek() == ',') {
        get();
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
    get();
    return a;
  }

  nlohmann::json inline_table() {
    expect('{');
    nlohmann::json t = nlohmann::json::object();
    skip_spaces();
    if (peek() == '}') {
      get();
      return t;
    }
    for (;;) {
      key_value(t);
      skip_spaces();
      if (peek() == ',') {
        get();
        continue;
      }
      expect('}');
      return t;
    }
  }

  std::string literal_string() {
    expect('\'');
    std::string out;
    while (peek() != '\'') {
      if (eof() || peek() == '\n') fail("unterminated string");
      out += get();
    }
    get();
    return out;
  }

  std::string basic_string() {
    expect('"');
    std::string out;
    for (;;) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      c = get();
      switch (c) {
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        case 'r':
          out += '\r';
          break;
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        default:
          fail(std::string("unsupported escape '\\") + c + "'");
      }
    }
  }

  nlohmann::json number() {
    std::string tok;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                      peek() == '.' || peek() == '_'))
      tok += get();
    if (tok.empty()) fail("expected a value");
    std::string clean;
    for (std::size_t i = 0; i < tok.size(); ++i) {
      if (tok[i] != '_') {
        clean += tok[i];
        continue;
      }
      if (i == 0 || i + 1 == tok.size() || !std::isdigit(static_cast<unsigned char>(tok[i - 1])) ||
          !std::isdigit(static_cast<unsigned char>(tok[i + 1])))
        fail("misplaced '_' in number '" + tok + "'");
    }
    const std::string body = (clean[0] == '+' || clean[0] == '-') ? clean.substr(1) : clean;
    const bool negative = clean[0] == '-';
    if (body == "inf") return negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    for (char c : body)
      if (!std::isdigit(static_cast<unsigned char>(c)) && !(is_float && (c == '.' || c == 'e' || c == 'E' || c == '+' || c == '-')))
        fail("bad value '" + tok + "'");
    std::size_t used = 0;
    try {
      if (is_float) {
        const double v = std::stod(clean, &used);
        if (used == clean.size()) return v;
      } else {
        if (body.size() > 1 && body[0] == '0') fail("leading zero in '" + tok + "'");
        const long long v = std::stoll(clean, &used);
        if (used == clean.size()) return v;
      }
    } catch (const std::out_of_range&) {
      fail("number out of range '" + tok + "'");
    } catch (const std::invalid_argument&) {
    }
    fail("bad value '" + tok + "'");
  }

  std::string s_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

}  // namespace detail

/// Parses TOML text into a JSON object (tables become objects).
inline nlohmann::json parse(const std::string& text) { return detail::Parser(text).parse(); }

inline nlohmann::json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace lcalab::toml
