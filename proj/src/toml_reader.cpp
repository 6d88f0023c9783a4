#include "flexctl/toml_reader.hpp"

#include "flexctl/error.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

namespace flexctl {

namespace {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        ++pos_;
        if (peek() == '[') fail("arrays of tables are not supported");
        skip_space();
        const std::vector<std::string> path = read_key_path();
        skip_space();
        expect(']');
        table = &open_table(root, path);
        end_of_line();
      } else {
        const int line = line_;
        const std::vector<std::string> path = read_key_path();
        skip_space();
        expect('=');
        skip_space();
        json value = read_value();
        end_of_line();
        assign(*table, path, std::move(value), line);
      }
    }
    return root;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::set<const json*> explicit_tables_;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + what);
  }
  [[noreturn]] void fail_at(int line, const std::string& what) const {
    throw ConfigError("line " + std::to_string(line) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }
  char take() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    take();
  }
  void skip_space() {
    while (peek() == ' ' || peek() == '\t') ++pos_;
  }
  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }
  void skip_blank_lines() {
    while (!at_end()) {
      skip_space();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() == '\n') {
        take();
      } else {
        break;
      }
    }
  }
  // Whitespace, comments and newlines inside arrays.
  void skip_insignificant() {
    while (!at_end()) {
      skip_space();
      skip_comment();
      if (peek() == '\r' || peek() == '\n') {
        take();
      } else {
        break;
      }
    }
  }
  void end_of_line() {
    skip_space();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected text after value");
    take();
  }

  static bool bare_key_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  }

  std::string read_key() {
    if (peek() == '"') return read_basic_string();
    if (peek() == '\'') return read_literal_string();
    const std::size_t start = pos_;
    while (bare_key_char(peek())) ++pos_;
    if (pos_ == start) fail("expected a key");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::vector<std::string> read_key_path() {
    std::vector<std::string> path{read_key()};
    skip_space();
    while (peek() == '.') {
      ++pos_;
      skip_space();
      path.push_back(read_key());
      skip_space();
    }
    return path;
  }

  std::string read_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = take();
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (at_end()) fail("unterminated string");
      switch (take()) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail("unsupported escape sequence");
      }
    }
    return out;
  }

  std::string read_literal_string() {
    expect('\'');
    const std::size_t start = pos_;
    while (!at_end() && peek() != '\'' && peek() != '\n') ++pos_;
    if (peek() != '\'') fail("unterminated string");
    std::string out(text_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  json read_value() {
    const char c = peek();
    if (c == '"') return read_basic_string();
    if (c == '\'') return read_literal_string();
    if (c == '[') return read_array();
    if (c == '{') return read_inline_table();
    return read_scalar();
  }

  json read_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_insignificant();
      if (peek() == ']') break;
      arr.push_back(read_value());
      skip_insignificant();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() != ']') fail("expected ',' or ']' in array");
    }
    ++pos_;
    return arr;
  }

  json read_inline_table() {
    expect('{');
    json table = json::object();
    skip_space();
    if (peek() == '}') {
      ++pos_;
      return table;
    }
    while (true) {
      skip_space();
      const int line = line_;
      const std::vector<std::string> path = read_key_path();
      skip_space();
      expect('=');
      skip_space();
      assign(table, path, read_value(), line);
      skip_space();
      if (peek() == ',') {
        ++pos_;
        continue;
      }
      if (peek() == '}') break;
      fail("expected ',' or '}' in inline table");
    }
    ++pos_;
    return table;
  }

  json read_scalar() {
    const std::size_t start = pos_;
    while (!at_end()) {
      const char c = peek();
      if (c == ',' || c == ']' || c == '}' || c == '#' || c == ' ' || c == '\t' || c == '\n' || c == '\r') break;
      ++pos_;
    }
    std::string token(text_.substr(start, pos_ - start));
    if (token.empty()) fail("expected a value");
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char ch : token) {
      if (ch != '_') digits += ch;
    }
    const std::string body = (digits[0] == '+' || digits[0] == '-') ? digits.substr(1) : digits;
    const double sign = digits[0] == '-' ? -1.0 : 1.0;
    if (body == "inf") return sign * std::numeric_limits<double>::infinity();
    if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = body.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data() + (digits[0] == '+' ? 1 : 0);
    const char* last = digits.data() + digits.size();
    if (!is_float) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return v;
    } else {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && ptr == last) return v;
    }
    fail("invalid value '" + token + "'");
  }

  json& open_table(json& root, const std::vector<std::string>& path) {
    json* node = &root;
    for (const std::string& key : path) {
      json& next = (*node)[key];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail("'" + key + "' is already a value, not a table");
      node = &next;
    }
    if (!explicit_tables_.insert(node).second) fail("table defined twice");
    return *node;
  }

  void assign(json& table, const std::vector<std::string>& path, json value, int line) {
    json* node = &table;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      json& next = (*node)[path[i]];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) fail_at(line, "'" + path[i] + "' is already a value, not a table");
      node = &next;
    }
    if (node->contains(path.back())) fail_at(line, "duplicate key '" + path.back() + "'");
    (*node)[path.back()] = std::move(value);
  }
};

}  // namespace

nlohmann::json parse_toml(std::string_view text) { return Reader(text).parse(); }

}  // namespace flexctl
