#include "gpe/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace gpe {

namespace {

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  int line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line) + ": " + what);
  }
  void skip_space() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool done() const { return pos >= text.size(); }
  char peek() const { return done() ? '\0' : text[pos]; }
};

bool is_key_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

std::vector<std::string> parse_key(Cursor& c) {
  std::vector<std::string> parts;
  while (true) {
    c.skip_space();
    const std::size_t start = c.pos;
    while (!c.done() && is_key_char(c.peek())) ++c.pos;
    if (c.pos == start) c.fail("expected a key");
    parts.push_back(c.text.substr(start, c.pos - start));
    c.skip_space();
    if (c.peek() != '.') break;
    ++c.pos;
  }
  return parts;
}

nlohmann::json parse_value(Cursor& c);

nlohmann::json parse_string(Cursor& c) {
  ++c.pos;  // opening quote
  std::string out;
  while (true) {
    if (c.done()) c.fail("unterminated string");
    const char ch = c.text[c.pos++];
    if (ch == '"') break;
    if (ch != '\\') {
      out.push_back(ch);
      continue;
    }
    if (c.done()) c.fail("unterminated escape");
    const char e = c.text[c.pos++];
    switch (e) {
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      default: c.fail(std::string("unsupported escape \\") + e);
    }
  }
  return out;
}

nlohmann::json parse_scalar(Cursor& c) {
  const std::size_t start = c.pos;
  while (!c.done() && c.peek() != ',' && c.peek() != ']' && c.peek() != ' ' && c.peek() != '\t') ++c.pos;
  const std::string tok = c.text.substr(start, c.pos - start);
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.empty()) c.fail("expected a value");
  const bool looks_int = tok.find_first_of(".eEn") == std::string::npos;
  if (looks_int) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data() + (tok[0] == '+'), tok.data() + tok.size(), v);
    if (ec == std::errc() && ptr == tok.data() + tok.size()) return v;
  }
  double d = 0.0;
  const char* first = tok.data() + (tok[0] == '+');
  const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), d);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) c.fail("cannot parse value '" + tok + "'");
  return d;
}

nlohmann::json parse_array(Cursor& c) {
  ++c.pos;  // [
  nlohmann::json arr = nlohmann::json::array();
  c.skip_space();
  if (c.peek() == ']') {
    ++c.pos;
    return arr;
  }
  while (true) {
    c.skip_space();
    arr.push_back(parse_value(c));
    c.skip_space();
    if (c.peek() == ',') {
      ++c.pos;
      c.skip_space();
      if (c.peek() == ']') {
        ++c.pos;
        return arr;
      }
      continue;
    }
    if (c.peek() == ']') {
      ++c.pos;
      return arr;
    }
    c.fail("expected ',' or ']' in array");
  }
}

nlohmann::json parse_value(Cursor& c) {
  c.skip_space();
  if (c.peek() == '"') return parse_string(c);
  if (c.peek() == '[') return parse_array(c);
  return parse_scalar(c);
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (in_string && ch == '\\') {
      ++i;
      continue;
    }
    if (ch == '"') in_string = !in_string;
    if (ch == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::string join(const std::vector<std::string>& parts) {
  std::string s;
  for (const auto& p : parts) s += (s.empty() ? "" : ".") + p;
  return s;
}

}  // namespace

nlohmann::json parse_config_text(const std::string& text) {
  nlohmann::json root = nlohmann::json::object();
  std::vector<std::string> table_path;
  std::set<std::string> seen_tables;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const std::string line = strip_comment(raw);
    Cursor c{line, 0, line_no};
    c.skip_space();
    if (c.done()) continue;
    if (c.peek() == '[') {
      ++c.pos;
      table_path = parse_key(c);
      if (c.peek() != ']') c.fail("expected ']' after table name");
      ++c.pos;
      c.skip_space();
      if (!c.done()) c.fail("trailing characters after table header");
      const std::string name = join(table_path);
      if (!seen_tables.insert(name).second) c.fail("duplicate table [" + name + "]");
      nlohmann::json* node = &root;
      for (const auto& part : table_path) {
        if (node->contains(part) && !(*node)[part].is_object()) c.fail("table [" + name + "] redefines a value");
        node = &(*node)[part];
        if (node->is_null()) *node = nlohmann::json::object();
      }
      continue;
    }
    std::vector<std::string> key = parse_key(c);
    if (c.peek() != '=') c.fail("expected '=' after key");
    ++c.pos;
    nlohmann::json value = parse_value(c);
    c.skip_space();
    if (!c.done()) c.fail("trailing characters after value");
    std::vector<std::string> full = table_path;
    full.insert(full.end(), key.begin(), key.end());
    nlohmann::json* node = &root;
    for (std::size_t i = 0; i + 1 < full.size(); ++i) {
      node = &(*node)[full[i]];
      if (node->is_null()) *node = nlohmann::json::object();
      if (!node->is_object()) c.fail("key '" + join(full) + "' nests under a value");
    }
    if (node->contains(full.back())) c.fail("duplicate key '" + join(full) + "'");
    (*node)[full.back()] = std::move(value);
  }
  return root;
}

nlohmann::json parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

ConfigTable::ConfigTable(const nlohmann::json& table, std::string path)
    : table_(table), path_(std::move(path)) {
  if (!table_.is_object()) throw ConfigError("[" + path_ + "] must be a table");
}

bool ConfigTable::has(const std::string& key) const { return table_.contains(key); }

void ConfigTable::fail(const std::string& key, const std::string& what) const {
  throw ConfigError((path_.empty() ? key : path_ + "." + key) + ": " + what);
}

const nlohmann::json& ConfigTable::at(const std::string& key) const {
  if (!table_.contains(key)) fail(key, "missing required key");
  used_.insert(key);
  return table_.at(key);
}

double ConfigTable::get_double(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number()) fail(key, "expected a number");
  return v.get<double>();
}

double ConfigTable::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

long long ConfigTable::get_int(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_number_integer()) fail(key, "expected an integer");
  return v.get<long long>();
}

long long ConfigTable::get_int(const std::string& key, long long fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigTable::get_u64(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const long long v = get_int(key);
  if (v < 0) fail(key, "expected a nonnegative integer");
  return static_cast<std::uint64_t>(v);
}

bool ConfigTable::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_boolean()) fail(key, "expected true or false");
  return v.get<bool>();
}

std::string ConfigTable::get_string(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_string()) fail(key, "expected a string");
  return v.get<std::string>();
}

std::string ConfigTable::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? get_string(key) : fallback;
}

std::vector<double> ConfigTable::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> ConfigTable::get_ints(const std::string& key, const std::vector<int>& fallback) const {
  if (!has(key)) return fallback;
  const auto& v = at(key);
  if (!v.is_array()) fail(key, "expected an array of integers");
  std::vector<int> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) fail(key, "expected an array of integers");
    out.push_back(e.get<int>());
  }
  return out;
}

const nlohmann::json& ConfigTable::get_raw(const std::string& key) const { return at(key); }

ConfigTable ConfigTable::table(const std::string& key) const {
  const auto& v = at(key);
  if (!v.is_object()) fail(key, "expected a table");
  return ConfigTable(v, path_.empty() ? key : path_ + "." + key);
}

ConfigTable ConfigTable::table_or_empty(const std::string& key) const {
  if (has(key)) return table(key);
  return ConfigTable(nlohmann::json::object(), path_.empty() ? key : path_ + "." + key);
}

void ConfigTable::finish() const {
  std::string unknown;
  for (auto it = table_.begin(); it != table_.end(); ++it)
    if (!used_.count(it.key())) unknown += (unknown.empty() ? "" : ", ") + it.key();
  if (!unknown.empty()) throw ConfigError("unknown key(s) in [" + (path_.empty() ? std::string("root") : path_) + "]: " + unknown);
}

}  // namespace gpe
