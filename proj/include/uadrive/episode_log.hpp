#ifndef UADRIVE_EPISODE_LOG_HPP_
#define UADRIVE_EPISODE_LOG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "uadrive/config.hpp"
#include "uadrive/environment.hpp"

namespace uadrive {

class LogFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kEpisodeLogVersion = 1;

struct EpisodeHeader {
  int version = kEpisodeLogVersion;
  std::string tag = "agent";  // "agent" or "human"
  int scenario = 1;
  bool informed = false;
  CaseSpec cases;
  int episode_index = 0;
  std::uint64_t world_seed = 0;
  std::uint64_t schedule_seed = 0;
  MpcSchedule schedule;
  KeyValues world_config;
  RewardParams reward;
};

struct StepRecord {
  int t = 0;
  PerturbationCase perturbation = PerturbationCase::VEVV;
  double a_tilde = 0.0;
  double a = 0.0;
  double reward = 0.0;
  double ego_position = 0.0;
  double ego_velocity = 0.0;
  double front_gap = 0.0;
  std::size_t obs_index = 0;  // record index in the observation blob
};

// Observations are indexed 0 (reset) .. steps.size(); step k refers to
// observation k + 1.
struct EpisodeLog {
  EpisodeHeader header;
  std::vector<StepRecord> steps;
  std::vector<Observation> observations;
  EpisodeKind kind = EpisodeKind::running;
  int t_terminal = -1;

  std::vector<double> rewards() const;
};

// Header for an environment that has just been reset.
EpisodeHeader make_header(const DrivingEnv& env, int scenario,
                          int episode_index, std::string tag);

// Appends one environment step (observation included); `world` is the
// state right after the step.
void record_step(EpisodeLog& log, const EnvStep& step, const WorldState& world);

// Closes the log with the final status.
void finish_log(EpisodeLog& log, EpisodeKind kind, int t_terminal);

// JSON lines at `path`; observations go to `path` + ".obs" as fixed-size
// records: 100 vision bytes, six little-endian doubles, one uncertainty byte
// (0xFF when uninformed, otherwise the four bits in the low nibble).
void write_episode_log(const EpisodeLog& log, const std::filesystem::path& path);

// Throws LogFormatError on malformed content. A missing observation blob is
// tolerated; `observations` is then left empty.
EpisodeLog read_episode_log(const std::filesystem::path& path);

inline constexpr std::size_t kObservationRecordSize = 100 + 6 * 8 + 1;
std::vector<std::uint8_t> encode_observation(const Observation& obs);
Observation decode_observation(const std::uint8_t* record);

struct ReplayResult {
  bool ok = true;
  int first_divergent_step = -1;  // t of the first mismatching record
  std::string message;
  int steps_replayed = 0;
};

// Re-simulates the logged raw commands and compares every logged quantity
// bit for bit. Writes one PGM per step into `grid_dir` when given.
ReplayResult replay_episode(const EpisodeLog& log,
                            const std::optional<std::filesystem::path>& grid_dir = std::nullopt);

}  // namespace uadrive

#endif  // UADRIVE_EPISODE_LOG_HPP_
