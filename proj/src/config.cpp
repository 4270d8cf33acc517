#include "kbl/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kbl {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_string(text.str(), path);
}

Config Config::parse_string(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ParseError(name, line_number, "expected key = value");
    Entry entry;
    entry.key = trim(stripped.substr(0, eq));
    entry.value = trim(stripped.substr(eq + 1));
    entry.line = line_number;
    if (entry.key.empty()) throw ParseError(name, line_number, "empty key");
    cfg.entries_.push_back(std::move(entry));
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  return find_last(key) != nullptr;
}

const Config::Entry* Config::find_last(const std::string& key) const {
  const Entry* found = nullptr;
  for (const Entry& e : entries_)
    if (e.key == key) found = &e;
  return found;
}

void Config::mark(const std::string& key) {
  for (Entry& e : entries_)
    if (e.key == key) e.consumed = true;
}

double Config::parse_number(const Entry& entry) const {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(entry.value.c_str(), &end);
  if (entry.value.empty() || end == entry.value.c_str() || *end != '\0' ||
      errno == ERANGE)
    throw ParseError(name_, entry.line,
                     "key '" + entry.key + "': malformed number '" + entry.value + "'");
  return v;
}

std::string Config::get_string(const std::string& key) {
  const Entry* e = find_last(key);
  if (!e) throw ParseError(name_, 0, "missing required key '" + key + "'");
  mark(key);
  return e->value;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find_last(key);
  if (!e) return fallback;
  mark(key);
  return e->value;
}

double Config::get_double(const std::string& key) {
  const Entry* e = find_last(key);
  if (!e) throw ParseError(name_, 0, "missing required key '" + key + "'");
  mark(key);
  return parse_number(*e);
}

double Config::get_double(const std::string& key, double fallback) {
  const Entry* e = find_last(key);
  if (!e) return fallback;
  mark(key);
  return parse_number(*e);
}

int Config::get_int(const std::string& key) {
  const double v = get_double(key);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ParseError(name_, find_last(key)->line,
                     "key '" + key + "': expected an integer");
  return i;
}

int Config::get_int(const std::string& key, int fallback) {
  if (!has(key)) return fallback;
  return get_int(key);
}

bool Config::get_bool(const std::string& key, bool fallback) {
  const Entry* e = find_last(key);
  if (!e) return fallback;
  mark(key);
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw ParseError(name_, e->line,
                   "key '" + key + "': expected true/false, got '" + e->value + "'");
}

std::vector<double> Config::get_doubles(const std::string& key) {
  std::vector<double> out;
  for (Entry& e : entries_) {
    if (e.key != key) continue;
    e.consumed = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = e.value.find(',', start);
      const std::string field = trim(e.value.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start));
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(field.c_str(), &end);
      if (field.empty() || end == field.c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError(name_, e.line,
                         "key '" + key + "': malformed number '" + field + "'");
      out.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  return out;
}

void Config::reject_unknown() const {
  for (const Entry& e : entries_)
    if (!e.consumed)
      throw ParseError(name_, e.line, "unknown key '" + e.key + "'");
}

}  // namespace kbl
