#pragma once

// Minimal TOML reader covering the subset used by the run configs:
// [section] and [section.sub] tables, string / integer / float / boolean
// values, homogeneous inline arrays, and # comments.

#include <map>
#include <string>
#include <vector>

namespace rbrl::toml {

struct Value {
  enum class Kind { String, Int, Float, Bool, Array };
  Kind kind = Kind::String;
  std::string str;
  long long integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> array;

  double as_number() const;  // int or float
};

class Table {
 public:
  bool contains(const std::string& dotted_key) const;

  // Typed getters; throw ConfigError when the key is missing or mistyped.
  std::string get_string(const std::string& key) const;
  long long get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_double_array(const std::string& key) const;
  std::vector<std::string> get_string_array(const std::string& key) const;

  // Getters with defaults.
  std::string get_string(const std::string& key, const std::string& dflt) const;
  long long get_int(const std::string& key, long long dflt) const;
  double get_double(const std::string& key, double dflt) const;
  bool get_bool(const std::string& key, bool dflt) const;

  std::vector<std::string> keys() const;

  std::map<std::string, Value> values;  // keyed by full dotted path
};

Table parse(const std::string& text);
Table parse_file(const std::string& path);

}  // namespace rbrl::toml
