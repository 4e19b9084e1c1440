#include "rbrl/toml.hpp"

#include "rbrl/common.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace rbrl::toml {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (c == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

std::string unescape(const std::string& s, int line_no) {
  std::string out;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (++i >= s.size()) throw ConfigError("toml: dangling escape on line " + std::to_string(line_no));
    switch (s[i]) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case '"': out += '"'; break;
      case '\\': out += '\\'; break;
      default:
        throw ConfigError("toml: unsupported escape on line " + std::to_string(line_no));
    }
  }
  return out;
}

Value parse_scalar(const std::string& raw, int line_no);

Value parse_array(const std::string& raw, int line_no) {
  Value v;
  v.kind = Value::Kind::Array;
  std::string inner = trim(raw.substr(1, raw.size() - 2));
  if (inner.empty()) return v;
  std::vector<std::string> items;
  bool in_str = false;
  int depth = 0;
  std::string cur;
  for (size_t i = 0; i < inner.size(); ++i) {
    char c = inner[i];
    if (c == '"' && (i == 0 || inner[i - 1] != '\\')) in_str = !in_str;
    if (!in_str && c == '[') ++depth;
    if (!in_str && c == ']') --depth;
    if (!in_str && depth == 0 && c == ',') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(cur);
  for (const auto& it : items) v.array.push_back(parse_scalar(trim(it), line_no));
  return v;
}

Value parse_scalar(const std::string& raw, int line_no) {
  Value v;
  if (raw.empty()) throw ConfigError("toml: empty value on line " + std::to_string(line_no));
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ConfigError("toml: unterminated array on line " + std::to_string(line_no));
    return parse_array(raw, line_no);
  }
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"')
      throw ConfigError("toml: unterminated string on line " + std::to_string(line_no));
    v.kind = Value::Kind::String;
    v.str = unescape(raw.substr(1, raw.size() - 2), line_no);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::Bool;
    v.boolean = (raw == "true");
    return v;
  }
  // Integer unless it contains a float marker.
  if (raw.find_first_of(".eEnN") == std::string::npos) {
    try {
      size_t pos = 0;
      v.integer = std::stoll(raw, &pos);
      if (pos == raw.size()) {
        v.kind = Value::Kind::Int;
        v.real = static_cast<double>(v.integer);
        return v;
      }
    } catch (const std::exception&) {
    }
  }
  try {
    size_t pos = 0;
    v.real = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
    v.kind = Value::Kind::Float;
    return v;
  } catch (const std::exception&) {
    throw ConfigError("toml: cannot parse value '" + raw + "' on line " + std::to_string(line_no));
  }
}

}  // namespace

double Value::as_number() const {
  if (kind == Kind::Int) return static_cast<double>(integer);
  if (kind == Kind::Float) return real;
  throw ConfigError("toml: value is not numeric");
}

Table parse(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("toml: malformed section header on line " + std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("toml: empty section name on line " + std::to_string(line_no));
      continue;
    }
    size_t eq = std::string::npos;
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') in_str = !in_str;
      if (line[i] == '=' && !in_str) {
        eq = i;
        break;
      }
    }
    if (eq == std::string::npos)
      throw ConfigError("toml: expected key = value on line " + std::to_string(line_no));
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("toml: empty key on line " + std::to_string(line_no));
    std::string full = section.empty() ? key : section + "." + key;
    if (t.values.count(full))
      throw ConfigError("toml: duplicate key '" + full + "' on line " + std::to_string(line_no));
    t.values[full] = parse_scalar(val, line_no);
  }
  return t;
}

Table parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("toml: cannot open file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool Table::contains(const std::string& key) const { return values.count(key) > 0; }

namespace {
const Value& require(const std::map<std::string, Value>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw ConfigError("config: missing key '" + key + "'");
  return it->second;
}
}  // namespace

std::string Table::get_string(const std::string& key) const {
  const Value& v = require(values, key);
  if (v.kind != Value::Kind::String) throw ConfigError("config: key '" + key + "' is not a string");
  return v.str;
}

long long Table::get_int(const std::string& key) const {
  const Value& v = require(values, key);
  if (v.kind != Value::Kind::Int) throw ConfigError("config: key '" + key + "' is not an integer");
  return v.integer;
}

double Table::get_double(const std::string& key) const {
  return require(values, key).as_number();
}

bool Table::get_bool(const std::string& key) const {
  const Value& v = require(values, key);
  if (v.kind != Value::Kind::Bool) throw ConfigError("config: key '" + key + "' is not a boolean");
  return v.boolean;
}

std::vector<double> Table::get_double_array(const std::string& key) const {
  const Value& v = require(values, key);
  if (v.kind != Value::Kind::Array) throw ConfigError("config: key '" + key + "' is not an array");
  std::vector<double> out;
  for (const auto& e : v.array) out.push_back(e.as_number());
  return out;
}

std::vector<std::string> Table::get_string_array(const std::string& key) const {
  const Value& v = require(values, key);
  if (v.kind != Value::Kind::Array) throw ConfigError("config: key '" + key + "' is not an array");
  std::vector<std::string> out;
  for (const auto& e : v.array) {
    if (e.kind != Value::Kind::String)
      throw ConfigError("config: array '" + key + "' holds non-string items");
    out.push_back(e.str);
  }
  return out;
}

std::string Table::get_string(const std::string& key, const std::string& dflt) const {
  return contains(key) ? get_string(key) : dflt;
}
long long Table::get_int(const std::string& key, long long dflt) const {
  return contains(key) ? get_int(key) : dflt;
}
double Table::get_double(const std::string& key, double dflt) const {
  return contains(key) ? get_double(key) : dflt;
}
bool Table::get_bool(const std::string& key, bool dflt) const {
  return contains(key) ? get_bool(key) : dflt;
}

std::vector<std::string> Table::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : values) out.push_back(k);
  return out;
}

}  // namespace rbrl::toml
