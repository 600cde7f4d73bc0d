#pragma once
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cafqa/pauli.hpp"  // ParseError

namespace cafqa {

/// Flat key-value document: `key: value` lines plus `key: |` block strings
/// with two-space indentation. A YAML-compatible scalar subset; nesting is
/// expressed with dotted keys (`metadata.seed`). Order-preserving.
class KvDoc {
 public:
  void set(const std::string& key, const std::string& value) {
    auto it = index_.find(key);
    if (it != index_.end()) {
      entries_[it->second].second = value;
    } else {
      index_[key] = entries_.size();
      entries_.emplace_back(key, value);
    }
  }

  void set_int(const std::string& key, long long v) { set(key, std::to_string(v)); }

  void set_double(const std::string& key, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    set(key, buf);
  }

  bool has(const std::string& key) const { return index_.count(key) > 0; }

  const std::string& get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw std::out_of_range("missing key '" + key + "'");
    return entries_[it->second].second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    auto it = index_.find(key);
    return it == index_.end() ? fallback : entries_[it->second].second;
  }

  long long get_int(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t pos = 0;
    long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("key '" + key + "' is not an integer");
    return v;
  }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("key '" + key + "' is not a number");
    return v;
  }

  /// All entries whose key starts with `prefix` + '.', with the prefix stripped.
  std::vector<std::pair<std::string, std::string>> section(
      const std::string& prefix) const {
    std::vector<std::pair<std::string, std::string>> out;
    std::string p = prefix + ".";
    for (const auto& [k, v] : entries_)
      if (k.rfind(p, 0) == 0) out.emplace_back(k.substr(p.size()), v);
    return out;
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const {
    return entries_;
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : entries_) {
      if (v.find('\n') != std::string::npos) {
        out << k << ": |\n";
        std::istringstream lines(v);
        std::string line;
        while (std::getline(lines, line)) out << "  " << line << "\n";
      } else {
        out << k << ": " << v << "\n";
      }
    }
    return out.str();
  }

  static KvDoc parse(const std::string& text) {
    KvDoc doc;
    std::vector<std::string> lines;
    {
      std::istringstream in(text);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
      }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string& line = lines[i];
      if (line.empty() || line[0] == '#') continue;
      std::size_t colon = line.find(':');
      if (colon == std::string::npos || colon == 0)
        throw ParseError("expected 'key: value'", int(i + 1));
      std::string key = line.substr(0, colon);
      std::string value = line.substr(colon + 1);
      std::size_t vs = value.find_first_not_of(' ');
      value = vs == std::string::npos ? "" : value.substr(vs);
      if (value == "|") {
        // block string: following lines indented by two spaces
        std::string block;
        while (i + 1 < lines.size() && lines[i + 1].rfind("  ", 0) == 0) {
          block += lines[i + 1].substr(2);
          block += "\n";
          ++i;
        }
        doc.set(key, block);
      } else {
        doc.set(key, value);
      }
    }
    return doc;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Atomic write: temp file in the same directory, flush, then rename.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cafqa
