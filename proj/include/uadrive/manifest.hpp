#ifndef UADRIVE_MANIFEST_HPP_
#define UADRIVE_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace uadrive {

inline constexpr const char* kSoftwareVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string config_hash;  // hex, empty when no config applies
  std::map<std::string, std::uint64_t> seeds;
  std::string started_at;   // ISO 8601 UTC
  std::string finished_at;  // empty while running
  std::string status = "running";  // running, ok, failed
  std::string message;
  std::map<std::string, std::string> artifacts;  // role -> path
  std::string software_version = kSoftwareVersion;
};

std::string utc_timestamp();

// Writes JSON to a temporary file in the same directory, then renames it
// over `path`, so readers never see a partial manifest.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace uadrive

#endif  // UADRIVE_MANIFEST_HPP_
