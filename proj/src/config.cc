#include "clustersim/config.h"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace csim {

namespace {

std::string_view trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_pow2(uint64_t v) { return v && !(v & (v - 1)); }

}  // namespace

void ClusterConfig::validate() const {
  if (n_cores < 1 || n_cores > 16) throw ConfigError(fmt::format("n_cores must be in [1,16], got {}", n_cores));
  if (!is_pow2(n_banks)) throw ConfigError("n_banks must be a power of two");
  if (word_bytes != 4) throw ConfigError("word_bytes must be 4");
  if (tcdm_bytes == 0 || tcdm_bytes % (n_banks * word_bytes) != 0) {
    throw ConfigError("tcdm_bytes must be a multiple of n_banks * word_bytes");
  }
  if (!is_pow2(icache_line_bytes) || icache_line_bytes < 4) throw ConfigError("icache_line_bytes must be a power of two >= 4");
  if (!is_pow2(icache_l0_bytes) || icache_l0_bytes < icache_line_bytes) throw ConfigError("bad icache_l0_bytes");
  if (!is_pow2(icache_l15_bytes) || icache_l15_bytes < icache_line_bytes) throw ConfigError("bad icache_l15_bytes");
  auto overlaps = [](uint64_t a, uint64_t an, uint64_t b, uint64_t bn) { return a < b + bn && b < a + an; };
  if (overlaps(tcdm_base, tcdm_bytes, l2_base, l2_bytes) || overlaps(tcdm_base, tcdm_bytes, periph_base, mmap::PERIPH_BYTES) ||
      overlaps(l2_base, l2_bytes, periph_base, mmap::PERIPH_BYTES)) {
    throw ConfigError("memory regions overlap");
  }
  if (watchdog_cycles == 0) throw ConfigError("watchdog_cycles must be positive");
}

KeyValues parse_key_values(std::string_view text, const std::string& origin) {
  KeyValues kv;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (size_t h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("{}:{}: expected key=value", origin, line_no));
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) throw ConfigError(fmt::format("{}:{}: empty key", origin, line_no));
    if (kv.count(key)) throw ConfigError(fmt::format("{}:{}: duplicate key '{}'", origin, line_no, key));
    kv[key] = value;
  }
  return kv;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: not a number: '{}'", key, value));
  }
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::string_view v = value;
  int base = 10;
  if (v.size() > 2 && v[0] == '0' && (v[1] == 'x' || v[1] == 'X')) {
    v.remove_prefix(2);
    base = 16;
  }
  uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("{}: not an unsigned integer: '{}'", key, value));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(fmt::format("{}: expected 0/1/true/false, got '{}'", key, v));
}

ClusterConfig cluster_config_from(const KeyValues& kv, ClusterConfig c) {
  for (const auto& [k, v] : kv) {
    auto u32 = [&] { return static_cast<uint32_t>(parse_uint(k, v)); };
    if (k == "n_cores") c.n_cores = u32();
    else if (k == "n_banks") c.n_banks = u32();
    else if (k == "word_bytes") c.word_bytes = u32();
    else if (k == "tcdm_bytes") c.tcdm_bytes = u32();
    else if (k == "tcdm_base") c.tcdm_base = u32();
    else if (k == "l2_base") c.l2_base = u32();
    else if (k == "l2_bytes") c.l2_bytes = u32();
    else if (k == "periph_base") c.periph_base = u32();
    else if (k == "icache_l0_bytes") c.icache_l0_bytes = u32();
    else if (k == "icache_line_bytes") c.icache_line_bytes = u32();
    else if (k == "icache_l15_bytes") c.icache_l15_bytes = u32();
    else if (k == "miss_l0_penalty") c.miss_l0_penalty = u32();
    else if (k == "miss_l15_penalty") c.miss_l15_penalty = u32();
    else if (k == "broadcast_enabled") c.broadcast_enabled = parse_bool(k, v);
    else if (k == "strict_divergence") c.strict_divergence = parse_bool(k, v);
    else if (k == "watchdog_cycles") c.watchdog_cycles = parse_uint(k, v);
    else if (k == "max_cycles") c.max_cycles = parse_uint(k, v);
    else throw ConfigError("unknown cluster config key '" + k + "'");
  }
  c.validate();
  return c;
}

KeyValues to_key_values(const ClusterConfig& c) {
  auto hex = [](uint32_t v) { return fmt::format("0x{:08x}", v); };
  return {
      {"n_cores", std::to_string(c.n_cores)},
      {"n_banks", std::to_string(c.n_banks)},
      {"word_bytes", std::to_string(c.word_bytes)},
      {"tcdm_bytes", std::to_string(c.tcdm_bytes)},
      {"tcdm_base", hex(c.tcdm_base)},
      {"l2_base", hex(c.l2_base)},
      {"l2_bytes", std::to_string(c.l2_bytes)},
      {"periph_base", hex(c.periph_base)},
      {"icache_l0_bytes", std::to_string(c.icache_l0_bytes)},
      {"icache_line_bytes", std::to_string(c.icache_line_bytes)},
      {"icache_l15_bytes", std::to_string(c.icache_l15_bytes)},
      {"miss_l0_penalty", std::to_string(c.miss_l0_penalty)},
      {"miss_l15_penalty", std::to_string(c.miss_l15_penalty)},
      {"broadcast_enabled", c.broadcast_enabled ? "true" : "false"},
      {"strict_divergence", c.strict_divergence ? "true" : "false"},
      {"watchdog_cycles", std::to_string(c.watchdog_cycles)},
      {"max_cycles", std::to_string(c.max_cycles)},
  };
}

}  // namespace csim
