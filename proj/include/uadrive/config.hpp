#ifndef UADRIVE_CONFIG_HPP_
#define UADRIVE_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "uadrive/sim_core.hpp"

namespace uadrive {

// Flat `key = value` pairs; `#` starts a comment. Keys are unique.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);

// Moves every WorldConfig key out of `values` into `config`. Keys not
// belonging to WorldConfig are left in place for other consumers.
void take_world_keys(KeyValues& values, WorldConfig& config);
KeyValues world_config_keys(const WorldConfig& config);

// Parses a file that contains only WorldConfig keys, then validates.
WorldConfig load_world_config(const std::filesystem::path& path);
WorldConfig world_config_from_text(std::string_view text);

std::uint64_t fnv1a64(std::string_view bytes);
// Hash of the canonical key-value rendering.
std::uint64_t config_hash(const KeyValues& values);
std::string hex64(std::uint64_t value);

// Deterministic stream derivation for experiment seeds.
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t index);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace uadrive

#endif  // UADRIVE_CONFIG_HPP_
