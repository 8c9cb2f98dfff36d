#pragma once

#include <map>
#include <string>
#include <vector>

namespace mmvdn {

// Line-oriented key=value settings. '#' starts a comment; blank lines are
// ignored; later keys override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.contains(key); }
  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  // Throws std::invalid_argument naming the first key outside `known`.
  void require_known(const std::vector<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<int> parse_int_list(const std::string& text, char sep = ',');

}  // namespace mmvdn
