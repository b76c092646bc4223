#include "uadrive/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace uadrive {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': expected a number, got '" +
                      std::string(text) + "'");
  return value;
}

template <typename Int>
Int to_int(const std::string& key, std::string_view text) {
  Int value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("key '" + key + "': expected an integer, got '" +
                      std::string(text) + "'");
  return value;
}

std::vector<SpawnSpec> parse_spawns(const std::string& key,
                                    std::string_view text) {
  // role:offset:speed, comma separated
  std::vector<SpawnSpec> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{}
                                           : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto c1 = item.find(':');
    const auto c2 = item.find(':', c1 == std::string_view::npos ? c1 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos)
      throw ConfigError("key '" + key + "': expected role:offset:speed");
    SpawnSpec spec;
    spec.role = parse_role(trim(item.substr(0, c1)));
    spec.offset_m = to_double(key, trim(item.substr(c1 + 1, c2 - c1 - 1)));
    spec.speed_mps = to_double(key, trim(item.substr(c2 + 1)));
    out.push_back(spec);
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues out;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key = value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError("duplicate key '" + key + "'");
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& values) {
  std::string out;
  for (const auto& [key, value] : values) out += key + " = " + value + "\n";
  return out;
}

void take_world_keys(KeyValues& values, WorldConfig& config) {
  auto take = [&](const char* key, auto&& apply) {
    auto it = values.find(key);
    if (it == values.end()) return;
    apply(std::string(key), std::string_view(it->second));
    values.erase(it);
  };
  take("route_length_m", [&](auto k, auto v) { config.route_length_m = to_double(k, v); });
  take("dt", [&](auto k, auto v) { config.dt = to_double(k, v); });
  take("t_max", [&](auto k, auto v) { config.t_max = to_int<int>(k, v); });
  take("t_bound", [&](auto k, auto v) { config.t_bound = to_int<int>(k, v); });
  take("min_start_distance_m", [&](auto k, auto v) { config.min_start_distance_m = to_double(k, v); });
  take("spawn_positions", [&](auto k, auto v) { config.spawn_positions = parse_spawns(k, v); });
  take("front_brake_period", [&](auto k, auto v) { config.front_brake_period = to_int<int>(k, v); });
  take("front_brake_duty", [&](auto k, auto v) { config.front_brake_duty = to_double(k, v); });
  take("front_brake_command", [&](auto k, auto v) { config.front_brake_command = to_double(k, v); });
  take("front_cruise_speed", [&](auto k, auto v) { config.front_cruise_speed = to_double(k, v); });
  take("front_phase_jitter", [&](auto k, auto v) { config.front_phase_jitter = to_int<int>(k, v); });
  take("seed", [&](auto k, auto v) { config.seed = to_int<std::uint64_t>(k, v); });
  take("max_accel", [&](auto k, auto v) { config.max_accel = to_double(k, v); });
  take("max_decel", [&](auto k, auto v) { config.max_decel = to_double(k, v); });
  take("v_cap", [&](auto k, auto v) { config.v_cap = to_double(k, v); });
  take("vehicle_length_m", [&](auto k, auto v) { config.vehicle_length_m = to_double(k, v); });
  take("follower_gap_m", [&](auto k, auto v) { config.follower_gap_m = to_double(k, v); });
}

KeyValues world_config_keys(const WorldConfig& config) {
  KeyValues out;
  out["route_length_m"] = format_double(config.route_length_m);
  out["dt"] = format_double(config.dt);
  out["t_max"] = std::to_string(config.t_max);
  out["t_bound"] = std::to_string(config.t_bound);
  out["min_start_distance_m"] = format_double(config.min_start_distance_m);
  std::string spawns;
  for (const auto& spec : config.spawn_positions) {
    if (!spawns.empty()) spawns += ", ";
    spawns += std::string(role_name(spec.role)) + ":" +
              format_double(spec.offset_m) + ":" + format_double(spec.speed_mps);
  }
  out["spawn_positions"] = spawns;
  out["front_brake_period"] = std::to_string(config.front_brake_period);
  out["front_brake_duty"] = format_double(config.front_brake_duty);
  out["front_brake_command"] = format_double(config.front_brake_command);
  out["front_cruise_speed"] = format_double(config.front_cruise_speed);
  out["front_phase_jitter"] = std::to_string(config.front_phase_jitter);
  out["seed"] = std::to_string(config.seed);
  out["max_accel"] = format_double(config.max_accel);
  out["max_decel"] = format_double(config.max_decel);
  out["v_cap"] = format_double(config.v_cap);
  out["vehicle_length_m"] = format_double(config.vehicle_length_m);
  out["follower_gap_m"] = format_double(config.follower_gap_m);
  return out;
}

WorldConfig world_config_from_text(std::string_view text) {
  KeyValues values = parse_key_values(text);
  WorldConfig config;
  take_world_keys(values, config);
  if (!values.empty())
    throw ConfigError("unknown config key '" + values.begin()->first + "'");
  config.validate();
  return config;
}

WorldConfig load_world_config(const std::filesystem::path& path) {
  KeyValues values = read_key_values(path);
  WorldConfig config;
  take_world_keys(values, config);
  if (!values.empty())
    throw ConfigError("unknown config key '" + values.begin()->first + "'");
  config.validate();
  return config;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x00000100000001b3ull;
  }
  return hash;
}

std::uint64_t config_hash(const KeyValues& values) {
  return fnv1a64(format_key_values(values));
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                          std::uint64_t index) {
  // splitmix64 over (base, stream hash, index)
  std::uint64_t z = base ^ fnv1a64(stream) ^ (index * 0x9e3779b97f4a7c15ull);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace uadrive
