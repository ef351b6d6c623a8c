#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace primevm {

/// Plain `key = value` lines; `#` starts a comment. Later keys override earlier ones.
class Config {
 public:
  static Config parse(std::istream& in);
  static Config parse_string(const std::string& text);
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::size_t get_size(const std::string& key, std::size_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
  /// Keys present in the file that no getter asked for.
  std::vector<std::string> unused() const;

 private:
  std::map<std::string, std::string> entries_;
  mutable std::set<std::string> read_;
};

/// Every size, ratio and timing constant of the machine.
struct Geometry {
  std::uint64_t seed = 1;

  // register symbol space
  std::size_t register_size = 4000;
  std::size_t register_active = 20;
  std::size_t kappa = 1200;
  std::size_t min_reach = 2;

  // opcode symbol space
  std::size_t opcode_size = 1000;
  std::size_t opcode_active = 20;

  // hash cluster
  std::size_t hash_size = 16000;
  std::size_t hash_active = 40;

  // training
  double alpha = 0.5;
  double margin = 0.05;
  double excitation = 2.0;
  std::size_t max_epochs = 2000;

  // memory
  double bound_drive = 0.2;
  double default_ratio = 0.35;

  // panels
  double panel_leak = 0.5;
  double recognizer_fill = 0.75;

  // timing (ticks)
  std::size_t t_clear = 12;
  std::size_t t_open = 0;  // 0: derived from relay depth
  std::size_t t_recall = 24;
  std::size_t t_bind = 4;
  std::size_t t_fetch = 4;
  std::size_t t_read = 8;
  double read_drive = 0.5;
  std::size_t stable_ticks = 3;

  // symbol budget
  std::size_t free_pool = 120;
  std::size_t code_lines = 200;

  // 1: add-carry entries whose sum is below ten are bound to false explicitly
  std::size_t bind_false = 1;

  static Geometry from_config(const Config& cfg);
  Config to_config() const;
  /// Canonical text of every field; equal geometries give equal strings.
  std::string fingerprint() const;
  double coverage() const { return static_cast<double>(register_active) / static_cast<double>(register_size); }
};

}  // namespace primevm
