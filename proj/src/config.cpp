#include "primevm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <variant>

#include "primevm/pattern.hpp"

namespace primevm {

namespace {

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("config key '" + key + "': bad number '" + text + "'");
  return value;
}

using Field = std::variant<std::size_t Geometry::*, double Geometry::*>;

const std::vector<std::pair<const char*, Field>>& geometry_fields() {
  static const std::vector<std::pair<const char*, Field>> fields = {
      {"register.size", &Geometry::register_size},
      {"register.active", &Geometry::register_active},
      {"kappa", &Geometry::kappa},
      {"register.min_reach", &Geometry::min_reach},
      {"opcode.size", &Geometry::opcode_size},
      {"opcode.active", &Geometry::opcode_active},
      {"hash.size", &Geometry::hash_size},
      {"hash.active", &Geometry::hash_active},
      {"train.alpha", &Geometry::alpha},
      {"train.margin", &Geometry::margin},
      {"train.excitation", &Geometry::excitation},
      {"train.max_epochs", &Geometry::max_epochs},
      {"memory.bound_drive", &Geometry::bound_drive},
      {"memory.default_ratio", &Geometry::default_ratio},
      {"panel.leak", &Geometry::panel_leak},
      {"panel.recognizer_fill", &Geometry::recognizer_fill},
      {"time.clear", &Geometry::t_clear},
      {"time.open", &Geometry::t_open},
      {"time.recall", &Geometry::t_recall},
      {"time.bind", &Geometry::t_bind},
      {"time.fetch", &Geometry::t_fetch},
      {"time.read", &Geometry::t_read},
      {"read.drive", &Geometry::read_drive},
      {"time.stable", &Geometry::stable_ticks},
      {"symbols.free_pool", &Geometry::free_pool},
      {"symbols.code_lines", &Geometry::code_lines},
      {"hash.bind_false", &Geometry::bind_false},
  };
  return fields;
}

}  // namespace

Config Config::parse(std::istream& in) {
  Config cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    cfg.entries_[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

Config Config::parse_string(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in);
}

void Config::set(const std::string& key, const std::string& value) { entries_[key] = value; }

bool Config::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  read_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  read_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad number '" + it->second + "'");
  }
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  read_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_number<std::int64_t>(key, it->second);
}

std::size_t Config::get_size(const std::string& key, std::size_t fallback) const {
  read_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_number<std::size_t>(key, it->second);
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  read_.insert(key);
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw ConfigError("config key '" + key + "': bad boolean '" + it->second + "'");
}

std::vector<std::string> Config::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : entries_)
    if (!read_.count(k)) out.push_back(k);
  return out;
}

Geometry Geometry::from_config(const Config& cfg) {
  Geometry g;
  g.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(g.seed)));
  for (const auto& [name, field] : geometry_fields()) {
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(g.*member)>;
          if constexpr (std::is_same_v<T, double>)
            g.*member = cfg.get_double(name, g.*member);
          else
            g.*member = static_cast<T>(cfg.get_size(name, static_cast<std::size_t>(g.*member)));
        },
        field);
  }
  if (g.register_active < 2 || g.register_active >= g.register_size) throw ConfigError("register.active out of range");
  if (g.opcode_active < 2 || g.opcode_active >= g.opcode_size) throw ConfigError("opcode.active out of range");
  if (g.hash_active < 1 || g.hash_active >= g.hash_size) throw ConfigError("hash.active out of range");
  if (g.kappa == 0 || g.kappa > g.register_size) throw ConfigError("kappa out of range");
  if (g.alpha <= 0.0) throw ConfigError("train.alpha must be positive");
  if (g.panel_leak <= 0.0 || g.panel_leak > 1.0) throw ConfigError("panel.leak must be in (0, 1]");
  return g;
}

Config Geometry::to_config() const {
  Config cfg;
  cfg.set("seed", std::to_string(seed));
  for (const auto& [name, field] : geometry_fields()) {
    std::visit(
        [&](auto member) {
          std::ostringstream os;
          os.precision(17);
          os << this->*member;
          cfg.set(name, os.str());
        },
        field);
  }
  return cfg;
}

std::string Geometry::fingerprint() const {
  std::ostringstream os;
  const auto cfg = to_config();
  for (const auto& [k, v] : cfg.entries()) os << k << '=' << v << '\n';
  return os.str();
}

}  // namespace primevm
