// Cluster configuration, memory map and flat key=value file parsing.
#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace mmap {
constexpr uint32_t TCDM_BASE = 0x10000000;
constexpr uint32_t PERIPH_BASE = 0x10200000;
constexpr uint32_t EU_BARRIER = PERIPH_BASE + 0x000;
constexpr uint32_t VLEM_CTRL = PERIPH_BASE + 0x100;
constexpr uint32_t CYCLE_COUNTER = PERIPH_BASE + 0x200;
constexpr uint32_t PERIPH_BYTES = 0x1000;
constexpr uint32_t L2_BASE = 0x1C000000;
}  // namespace mmap

struct ClusterConfig {
  unsigned n_cores = 16;
  unsigned n_banks = 32;
  unsigned word_bytes = 4;
  uint32_t tcdm_bytes = 131072;
  uint32_t tcdm_base = mmap::TCDM_BASE;
  uint32_t l2_base = mmap::L2_BASE;
  uint32_t l2_bytes = 512 * 1024;
  uint32_t periph_base = mmap::PERIPH_BASE;
  unsigned icache_l0_bytes = 512;
  unsigned icache_line_bytes = 16;
  unsigned icache_l15_bytes = 4096;
  unsigned miss_l0_penalty = 5;
  unsigned miss_l15_penalty = 20;
  bool broadcast_enabled = true;
  bool strict_divergence = true;
  uint64_t watchdog_cycles = 10000;
  uint64_t max_cycles = 200'000'000;

  // Throws ConfigError when invariants do not hold.
  void validate() const;
};

using KeyValues = std::map<std::string, std::string>;

// Flat "key=value" lines; '#' starts a comment; blank lines ignored.
KeyValues parse_key_values(std::string_view text, const std::string& origin = "<input>");
std::string read_text_file(const std::string& path);

// Applies known keys; unknown keys throw ConfigError.
ClusterConfig cluster_config_from(const KeyValues& kv, ClusterConfig base = {});
KeyValues to_key_values(const ClusterConfig& c);

double parse_double(const std::string& key, const std::string& value);
uint64_t parse_uint(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);

}  // namespace csim
