// Flat key = value configuration text: one assignment per line, '#' starts a
// comment, blank lines ignored. Keys may repeat; list getters see every
// occurrence in file order. Getters mark keys as consumed so that
// reject_unknown() can point at stray entries by line number.
#pragma once

#include <string>
#include <vector>

#include "kbl/io.hpp"

namespace kbl {

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text,
                             const std::string& name = "<config>");

  bool has(const std::string& key) const;

  // Single-value getters use the last occurrence. The no-default forms throw
  // ParseError when the key is absent.
  std::string get_string(const std::string& key);
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key);
  double get_double(const std::string& key, double fallback);
  int get_int(const std::string& key);
  int get_int(const std::string& key, int fallback);
  bool get_bool(const std::string& key, bool fallback);

  // Every occurrence of the key, each value split on commas.
  std::vector<double> get_doubles(const std::string& key);

  // Throws ParseError naming the first key never touched by a getter.
  void reject_unknown() const;

  const std::string& source_name() const { return name_; }

 private:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
    bool consumed = false;
  };

  const Entry* find_last(const std::string& key) const;
  void mark(const std::string& key);
  double parse_number(const Entry& entry) const;

  std::string name_;
  std::vector<Entry> entries_;
};

}  // namespace kbl
