#include "uadrive/manifest.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace uadrive {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf;
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  nlohmann::json j = {{"command", m.command},
                      {"arguments", m.arguments},
                      {"config_hash", m.config_hash},
                      {"seeds", m.seeds},
                      {"started_at", m.started_at},
                      {"finished_at", m.finished_at},
                      {"status", m.status},
                      {"message", m.message},
                      {"artifacts", m.artifacts},
                      {"software_version", m.software_version}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.arguments = j.at("arguments").get<std::vector<std::string>>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seeds = j.at("seeds").get<std::map<std::string, std::uint64_t>>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  m.status = j.at("status").get<std::string>();
  m.message = j.at("message").get<std::string>();
  m.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  m.software_version = j.at("software_version").get<std::string>();
  return m;
}

}  // namespace uadrive
