#include "qfedtd/config.hpp"

#include <cctype>
#include <charconv>
#include <filesystem>

#include "qfedtd/error.hpp"
#include "qfedtd/io_util.hpp"

namespace qfedtd {

namespace {

using nlohmann::json;

class TomlReader {
 public:
  explicit TomlReader(const std::string& text) : text_(text) {}

  json parse() {
    json root = json::object();
    json* table = &root;
    while (true) {
      skip_blank_lines();
      if (at_end()) break;
      if (peek() == '[') {
        table = open_table(root);
      } else {
        read_key_value(*table);
      }
      finish_line();
    }
    return root;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_) + ": " + what);
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return at_end() ? '\0' : text_[pos_]; }

  void skip_spaces() {
    while (!at_end() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (peek() == '#') {
      while (!at_end() && peek() != '\n') ++pos_;
    }
  }

  // Whitespace, comments and newlines, e.g. between array elements.
  void skip_blank_lines() {
    while (!at_end()) {
      skip_spaces();
      skip_comment();
      if (peek() == '\r') ++pos_;
      if (peek() != '\n') return;
      ++pos_;
      ++line_;
    }
  }

  void finish_line() {
    skip_spaces();
    skip_comment();
    if (peek() == '\r') ++pos_;
    if (at_end()) return;
    if (peek() != '\n') fail("unexpected trailing characters");
    ++pos_;
    ++line_;
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string read_bare_key() {
    skip_spaces();
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                         peek() == '-')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    std::string key = text_.substr(start, pos_ - start);
    skip_spaces();
    return key;
  }

  std::vector<std::string> read_dotted_key() {
    std::vector<std::string> parts{read_bare_key()};
    while (peek() == '.') {
      ++pos_;
      parts.push_back(read_bare_key());
    }
    return parts;
  }

  json* descend(json& root, const std::vector<std::string>& path, std::size_t count) {
    json* node = &root;
    for (std::size_t i = 0; i < count; ++i) {
      json& child = (*node)[path[i]];
      if (child.is_null()) child = json::object();
      if (child.is_array() && !child.empty() && child.back().is_object()) {
        node = &child.back();
      } else if (child.is_object()) {
        node = &child;
      } else {
        fail("'" + path[i] + "' is not a table");
      }
    }
    return node;
  }

  json* open_table(json& root) {
    expect('[');
    const bool array_table = peek() == '[';
    if (array_table) ++pos_;
    const auto path = read_dotted_key();
    expect(']');
    if (array_table) expect(']');
    json* parent = descend(root, path, path.size() - 1);
    json& slot = (*parent)[path.back()];
    if (array_table) {
      if (slot.is_null()) slot = json::array();
      if (!slot.is_array()) fail("'" + path.back() + "' is not an array of tables");
      slot.push_back(json::object());
      return &slot.back();
    }
    if (slot.is_null()) slot = json::object();
    if (!slot.is_object()) fail("'" + path.back() + "' redefined");
    return &slot;
  }

  void read_key_value(json& table) {
    const auto path = read_dotted_key();
    expect('=');
    skip_spaces();
    json* target = descend(table, path, path.size() - 1);
    if (target->contains(path.back())) fail("duplicate key '" + path.back() + "'");
    (*target)[path.back()] = read_value();
  }

  json read_value() {
    const char c = peek();
    if (c == '"') return read_string();
    if (c == '[') return read_array();
    if (text_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return true;
    }
    if (text_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return false;
    }
    return read_number();
  }

  json read_string() {
    expect('"');
    std::string out;
    while (true) {
      if (at_end() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      const char e = text_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  json read_array() {
    expect('[');
    json out = json::array();
    while (true) {
      skip_blank_lines();
      if (peek() == ']') {
        ++pos_;
        return out;
      }
      out.push_back(read_value());
      skip_blank_lines();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json read_number() {
    const std::size_t start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' ||
                         peek() == '-' || peek() == '.' || peek() == '_')) {
      ++pos_;
    }
    std::string token;
    for (std::size_t i = start; i < pos_; ++i) {
      if (text_[i] != '_') token += text_[i];
    }
    if (token.empty()) fail("expected a value");
    const char* first = token.data();
    const char* last = token.data() + token.size();
    if (*first == '+') ++first;
    const bool is_float = token.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      const auto [end, ec] = std::from_chars(first, last, v);
      if (ec == std::errc() && end == last) return v;
      fail("invalid integer '" + token + "'");
    }
    double v = 0;
    const auto [end, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && end == last) return v;
    fail("invalid value '" + token + "'");
  }
};

}  // namespace

nlohmann::json parse_toml(const std::string& text) { return TomlReader(text).parse(); }

nlohmann::json load_toml(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::ConfigError, "config file not found: " + path);
  }
  return parse_toml(read_file(path));
}

}  // namespace qfedtd
