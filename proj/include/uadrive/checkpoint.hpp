#ifndef UADRIVE_CHECKPOINT_HPP_
#define UADRIVE_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "uadrive/config.hpp"
#include "uadrive/policy.hpp"
#include "uadrive/ppo.hpp"
#include "uadrive/reward.hpp"

namespace uadrive {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  int scenario = 1;  // training scenario; the network's informedness follows it
  bool informed = false;
  PolicyParams params;
  PpoHyperParams hyper;
  WorldConfig world;
  RewardParams reward;
  long long global_step = 0;
  int episode = -1;              // training episode that produced the snapshot
  double episode_return = 0.0;  // its cumulative training reward
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

// Little-endian binary: magic "UADCKPT\0", version, header fields, the
// hyperparameter/world/reward key-values as text, the flat parameters and a
// trailing FNV-1a checksum over everything before it.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Throws CheckpointError on bad magic, version, checksum or shape.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Text sidecar next to a checkpoint: `path` + ".manifest.txt".
void write_checkpoint_manifest(const Checkpoint& ckpt, const std::filesystem::path& path);

}  // namespace uadrive

#endif  // UADRIVE_CHECKPOINT_HPP_
