#pragma once

// Flat key/value configuration. Sections prefix keys: under "[schedule]",
// "beta0 = 64" is stored as "schedule.beta0". Insertion order is kept so a
// config can be written back out unchanged.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "ddinfer/errors.hpp"

namespace ddinfer {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

/// Parses a whole token as a double; nullopt on trailing junk.
inline std::optional<double> parse_double(std::string_view s) {
  s = detail::trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, p);
}

class Config {
 public:
  static Config parse(std::string_view text) {
    Config c;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      ++line_no;
      if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ParseError("unterminated section header", line_no);
        section = std::string(detail::trim(line.substr(1, line.size() - 2)));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
      const auto key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw ParseError("empty key", line_no);
      const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
      if (c.has(full)) throw ParseError("duplicate key '" + full + "'", line_no);
      c.set(full, std::string(detail::trim(line.substr(eq + 1))));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  [[nodiscard]] bool has(const std::string& key) const { return index_.count(key) != 0; }

  void set(const std::string& key, std::string value) {
    if (auto it = index_.find(key); it != index_.end()) {
      entries_[it->second].second = std::move(value);
      return;
    }
    index_.emplace(key, entries_.size());
    entries_.emplace_back(key, std::move(value));
  }

  [[nodiscard]] const std::string& get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw DomainError("missing config key '" + key + "'");
    return entries_[it->second].second;
  }
  [[nodiscard]] std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
  }

  [[nodiscard]] double get_double(const std::string& key) const {
    const auto v = parse_double(get(key));
    if (!v) throw DomainError("config key '" + key + "' is not a number");
    return *v;
  }
  [[nodiscard]] double get_double_or(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
  }

  [[nodiscard]] std::int64_t get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw DomainError("config key '" + key + "' is not an integer");
    return v;
  }
  [[nodiscard]] std::int64_t get_int_or(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
  }

  [[nodiscard]] std::uint64_t get_u64(const std::string& key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw DomainError("config key '" + key + "' is not an unsigned integer");
    return v;
  }

  [[nodiscard]] std::vector<double> get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : detail::split_ws(get(key))) {
      const auto v = parse_double(tok);
      if (!v) throw DomainError("config key '" + key + "' has a non-numeric entry '" + tok + "'");
      out.push_back(*v);
    }
    return out;
  }

  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Back to text, one section header per run of keys sharing a prefix.
  [[nodiscard]] std::string to_text() const {
    std::string out;
    std::string current;
    for (const auto& [key, value] : entries_) {
      const auto dot = key.rfind('.');
      const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
      const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
      if (section != current) {
        if (section.empty()) {
          out += "[]\n";  // back to top level
        } else {
          if (!out.empty()) out += "\n";
          out += "[" + section + "]\n";
        }
        current = section;
      }
      out += leaf + " = " + value + "\n";
    }
    return out;
  }

  bool operator==(const Config& o) const { return entries_ == o.entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace ddinfer
