#include "sihg/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace sihg {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.')
      return false;
  return true;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

// Quoted values keep their quotes in the raw token; the tail after the
// closing quote may only be a comment.
std::string parse_value(int line, const std::string& raw) {
  std::string v = trim(raw);
  if (v.empty()) fail(line, "empty value");
  if (v.front() == '"') {
    std::string out = "\"";
    std::size_t j = 1;
    for (; j < v.size(); ++j) {
      if (v[j] == '\\') {
        if (j + 1 >= v.size() || (v[j + 1] != '"' && v[j + 1] != '\\'))
          fail(line, "unsupported escape in string");
        out += v[j];
        out += v[j + 1];
        ++j;
      } else if (v[j] == '"') {
        out += '"';
        const std::string tail = trim(v.substr(j + 1));
        if (!tail.empty() && tail.front() != '#') fail(line, "trailing junk after string");
        return out;
      } else {
        out += v[j];
      }
    }
    fail(line, "unterminated string");
  }
  const std::size_t hash = v.find('#');
  if (hash != std::string::npos) v = trim(v.substr(0, hash));
  if (v.empty()) fail(line, "empty value");
  return v;
}

std::string unquote(const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '"') return raw;
  std::string out;
  for (std::size_t j = 1; j + 1 < raw.size(); ++j) {
    if (raw[j] == '\\') {
      ++j;
      out += raw[j];
    } else {
      out += raw[j];
    }
  }
  return out;
}

ConfigFile::Entries* section_of(ConfigFile& c, const std::string& name) {
  for (auto& [sec, entries] : c.sections)
    if (sec == name) return &entries;
  return nullptr;
}

}  // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile out;
  std::string current;  // "" globals
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_name(name)) fail(line, "bad section name");
      if (section_of(out, name) != nullptr) fail(line, "duplicate section [" + name + "]");
      out.sections.emplace_back(name, Entries{});
      current = name;
      continue;
    }
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_name(key)) fail(line, "bad key name");
    Entries* entries = section_of(out, current);
    if (entries == nullptr) {
      out.sections.emplace_back(current, Entries{});
      entries = &out.sections.back().second;
    }
    for (const auto& [k, v] : *entries)
      if (k == key) fail(line, "duplicate key '" + key + "'");
    entries->emplace_back(key, parse_value(line, s.substr(eq + 1)));
  }
  return out;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string ConfigFile::serialize() const {
  std::string out;
  for (const auto& [name, entries] : sections) {
    if (!name.empty()) {
      if (!out.empty()) out += "\n";
      out += "[" + name + "]\n";
    }
    for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
  }
  return out;
}

const std::string* ConfigFile::find(const std::string& section, const std::string& key) const {
  for (const auto& [name, entries] : sections) {
    if (name != section) continue;
    for (const auto& [k, v] : entries)
      if (k == key) return &v;
  }
  return nullptr;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
  const std::string* raw = find(section, key);
  if (raw == nullptr) throw ConfigError("missing key " + section + "." + key);
  return unquote(*raw);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
  const std::string* raw = find(section, key);
  return raw == nullptr ? fallback : unquote(*raw);
}

namespace {

double to_double(const std::string& section, const std::string& key, const std::string& raw) {
  char* end = nullptr;
  const double v = std::strtod(raw.c_str(), &end);
  if (end == raw.c_str() || *end != '\0')
    throw ConfigError("key " + section + "." + key + ": not a number: " + raw);
  return v;
}

long to_long(const std::string& section, const std::string& key, const std::string& raw) {
  char* end = nullptr;
  const long v = std::strtol(raw.c_str(), &end, 10);
  if (end == raw.c_str() || *end != '\0')
    throw ConfigError("key " + section + "." + key + ": not an integer: " + raw);
  return v;
}

}  // namespace

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
  const std::string* raw = find(section, key);
  if (raw == nullptr) throw ConfigError("missing key " + section + "." + key);
  return to_double(section, key, *raw);
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
  const std::string* raw = find(section, key);
  return raw == nullptr ? fallback : to_double(section, key, *raw);
}

long ConfigFile::get_long(const std::string& section, const std::string& key) const {
  const std::string* raw = find(section, key);
  if (raw == nullptr) throw ConfigError("missing key " + section + "." + key);
  return to_long(section, key, *raw);
}

long ConfigFile::get_long(const std::string& section, const std::string& key,
                          long fallback) const {
  const std::string* raw = find(section, key);
  return raw == nullptr ? fallback : to_long(section, key, *raw);
}

std::uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                                  std::uint64_t fallback) const {
  const std::string* raw = find(section, key);
  if (raw == nullptr) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw->c_str(), &end, 10);
  if (end == raw->c_str() || *end != '\0')
    throw ConfigError("key " + section + "." + key + ": not an unsigned integer: " + *raw);
  return static_cast<std::uint64_t>(v);
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
  const std::string* raw = find(section, key);
  if (raw == nullptr) return fallback;
  if (*raw == "true") return true;
  if (*raw == "false") return false;
  throw ConfigError("key " + section + "." + key + ": expected true or false, got " + *raw);
}

void ConfigFile::set(const std::string& section, const std::string& key, const std::string& raw) {
  Entries* entries = section_of(*this, section);
  if (entries == nullptr) {
    sections.emplace_back(section, Entries{});
    entries = &sections.back().second;
  }
  for (auto& [k, v] : *entries) {
    if (k == key) {
      v = raw;
      return;
    }
  }
  entries->emplace_back(key, raw);
}

void ConfigFile::set_string(const std::string& section, const std::string& key,
                            const std::string& value) {
  std::string raw = "\"";
  for (char c : value) {
    if (c == '"' || c == '\\') raw += '\\';
    raw += c;
  }
  raw += '"';
  set(section, key, raw);
}

std::string config_hash(const ConfigFile& config) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : config.serialize()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int j = 15; j >= 0; --j) {
    out[static_cast<std::size_t>(j)] = hex[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace sihg
