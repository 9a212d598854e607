#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace hns {

// Flat "key = value" config file. One hyperparameter per line, '#' comments.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse_text(const std::string& text);
  static KvConfig load(const std::string& path);
  void save(const std::string& path) const;
  std::string to_text() const;

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  void set(const std::string& key, const std::string& v) { kv_[key] = v; }
  void set(const std::string& key, double v);
  void set(const std::string& key, int64_t v);
  void set(const std::string& key, bool v) { kv_[key] = v ? "true" : "false"; }

  std::string get_str(const std::string& key, const std::string& def) const;
  std::string require_str(const std::string& key) const;
  double get_f64(const std::string& key, double def) const;
  int64_t get_i64(const std::string& key, int64_t def) const;
  bool get_bool(const std::string& key, bool def) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

  // Stable 64-bit digest over sorted entries; stored in checkpoints.
  uint64_t digest() const;

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace hns
