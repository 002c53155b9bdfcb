#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sihg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sectioned key = value text, a strict TOML subset: '#' comments, one
// [section] per name, string values in double quotes (\" and \\ escapes),
// everything else kept as the raw token. Order is preserved so
// parse(serialize(x)) == x.
struct ConfigFile {
  using Entries = std::vector<std::pair<std::string, std::string>>;
  std::vector<std::pair<std::string, Entries>> sections;  // front may be the "" globals

  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);
  std::string serialize() const;

  bool operator==(const ConfigFile& other) const { return sections == other.sections; }

  // Raw token lookup; nullptr when the section or key is absent.
  const std::string* find(const std::string& section, const std::string& key) const;
  bool has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
  }

  // Required getters throw ConfigError naming section.key; defaulted ones
  // fall back when the key is absent but still throw on a malformed value.
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  long get_long(const std::string& section, const std::string& key) const;
  long get_long(const std::string& section, const std::string& key, long fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  // Inserts or overwrites; creates the section at the back when missing.
  void set(const std::string& section, const std::string& key, const std::string& raw);
  void set_string(const std::string& section, const std::string& key, const std::string& value);
};

// FNV-1a 64 over the canonical serialization, as 16 hex digits.
std::string config_hash(const ConfigFile& config);

}  // namespace sihg
