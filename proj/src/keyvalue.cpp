#include "genbench/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "genbench/error.hpp"

namespace genbench {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw Error(ErrorKind::Io, "cannot format double");
  return std::string(buf, ptr);
}

std::optional<double> parse_double(const std::string& text) {
  const std::string t = trim(text);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return value;
}

std::optional<std::int64_t> parse_int(const std::string& text) {
  const std::string t = trim(text);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty()) return std::nullopt;
  return value;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void KeyValue::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = value;
      return;
    }
  }
  entries_.emplace_back(key, value);
}

void KeyValue::set(const std::string& key, double value) { set(key, format_double(value)); }
void KeyValue::set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
void KeyValue::set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

bool KeyValue::contains(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> KeyValue::find(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& KeyValue::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  throw Error(ErrorKind::Io, "manifest is missing key '" + key + "'");
}

double KeyValue::get_double(const std::string& key) const {
  auto v = parse_double(get(key));
  if (!v) throw Error(ErrorKind::Io, "manifest key '" + key + "' is not a number: " + get(key));
  return *v;
}

std::int64_t KeyValue::get_int(const std::string& key) const {
  auto v = parse_int(get(key));
  if (!v) throw Error(ErrorKind::Io, "manifest key '" + key + "' is not an integer: " + get(key));
  return *v;
}

std::uint64_t KeyValue::get_uint(const std::string& key) const {
  const std::string t = trim(get(key));
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || ptr != t.data() + t.size() || t.empty())
    throw Error(ErrorKind::Io, "manifest key '" + key + "' is not an unsigned integer: " + t);
  return value;
}

std::string KeyValue::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
  return out.str();
}

KeyValue KeyValue::parse(const std::string& text, const std::string& origin) {
  KeyValue kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Io,
                  origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw Error(ErrorKind::Io, origin + ":" + std::to_string(lineno) + ": empty key");
    if (kv.contains(key))
      throw Error(ErrorKind::Io, origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.entries_.emplace_back(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

void KeyValue::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << serialize();
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

KeyValue KeyValue::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

}  // namespace genbench
