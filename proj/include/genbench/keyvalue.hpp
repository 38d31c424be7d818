#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace genbench {

/// Ordered flat `key = value` text, used for manifests and config files.
/// Lines starting with '#' are comments. Keys are unique; `set` replaces.
class KeyValue {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value);
  void set(const std::string& key, std::int64_t value);
  void set(const std::string& key, std::uint64_t value);
  void set(const std::string& key, int value) { set(key, static_cast<std::int64_t>(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  bool contains(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;

  // These throw Error(Io) when the key is missing or malformed.
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::int64_t get_int(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string serialize() const;
  static KeyValue parse(const std::string& text, const std::string& origin);

  void write(const std::filesystem::path& path) const;
  static KeyValue read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest text that parses back to the identical double.
std::string format_double(double value);
std::optional<double> parse_double(const std::string& text);
std::optional<std::int64_t> parse_int(const std::string& text);

/// 64-bit FNV-1a, used to fingerprint configurations.
std::uint64_t fnv1a64(const std::string& text);

}  // namespace genbench
