#include "hns/common/kvconfig.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "hns/common/rng.hpp"

namespace hns {

static std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

KvConfig KvConfig::parse_text(const std::string& text) {
  KvConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    c.kv_[key] = val;
  }
  return c;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

void KvConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << to_text();
}

std::string KvConfig::to_text() const {
  std::ostringstream out;
  for (const auto& [k, v] : kv_) out << k << " = " << v << "\n";
  return out.str();
}

void KvConfig::set(const std::string& key, double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  kv_[key] = ss.str();
}

void KvConfig::set(const std::string& key, int64_t v) { kv_[key] = std::to_string(v); }

std::string KvConfig::get_str(const std::string& key, const std::string& def) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? def : it->second;
}

std::string KvConfig::require_str(const std::string& key) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) throw std::runtime_error("missing config key: " + key);
  return it->second;
}

double KvConfig::get_f64(const std::string& key, double def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw std::runtime_error("config key " + key + ": not a number: " + it->second);
  }
}

int64_t KvConfig::get_i64(const std::string& key, int64_t def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  try {
    return std::stoll(it->second);
  } catch (...) {
    throw std::runtime_error("config key " + key + ": not an integer: " + it->second);
  }
}

bool KvConfig::get_bool(const std::string& key, bool def) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config key " + key + ": not a bool: " + v);
}

uint64_t KvConfig::digest() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : kv_) {
    for (char c : k) h = hash_combine(h, static_cast<uint64_t>(static_cast<unsigned char>(c)));
    h = hash_combine(h, 0x3d);
    for (char c : v) h = hash_combine(h, static_cast<uint64_t>(static_cast<unsigned char>(c)));
    h = hash_combine(h, 0x0a);
  }
  return h;
}

}  // namespace hns
