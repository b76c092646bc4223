#ifndef UADRIVE_EXPERIMENT_HPP_
#define UADRIVE_EXPERIMENT_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uadrive/checkpoint.hpp"
#include "uadrive/environment.hpp"
#include "uadrive/episode_log.hpp"
#include "uadrive/metrics.hpp"

namespace uadrive {

struct ExperimentConfig {
  int scenario = 1;  // training scenario, 1..3
  long long total_steps = 2'000'000;
  int validate_every_n_episodes = 100;
  int validation_episodes = 20;
  int test_episodes = 60;
  int candidates = 3;
  // Also keep this many of the best validation-time snapshots (ranked by
  // greedy validation reward) as candidates; 0 selects among top training
  // returns only.
  int validation_candidates = 0;
  std::uint64_t seed = 1;
  double initial_mu = 0.0;  // mean action of the freshly initialized policy
  WorldConfig world;
  RewardParams reward;
  PpoHyperParams hyper;

  // Scenario 1 trains on VEVV, scenarios 2 and 3 on the mixed case.
  CaseSpec training_case() const;
  bool informed() const;
  // Throws ConfigError.
  void validate() const;
  // Every setting as key-values; the hash of this map identifies the run.
  KeyValues keys() const;
};

// Keys: the world, PPO and "reward.*" keys plus total_steps,
// validate_every_n_episodes, validation_episodes, test_episodes,
// candidates, seed and initial_mu. Unknown keys raise ConfigError.
ExperimentConfig experiment_config_from_keys(KeyValues values, int scenario);
ExperimentConfig load_experiment_config(const std::filesystem::path& path, int scenario);

// Seed streams. Training, validation and test never share a stream.
std::uint64_t train_world_seed(std::uint64_t base, int episode);
std::uint64_t train_schedule_seed(std::uint64_t base, int episode);
std::uint64_t validation_world_seed(std::uint64_t base, int episode);
std::uint64_t validation_schedule_seed(std::uint64_t base, int episode);
std::uint64_t test_world_seed(std::uint64_t base, int episode);
std::uint64_t test_schedule_seed(std::uint64_t base, int episode);

// Indices of the k largest values in ascending index order. On ties the
// earlier index wins.
std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k);

// Argmax with the earliest index winning ties. Throws std::invalid_argument
// on empty input.
std::size_t select_best_index(std::span<const double> scores);

struct EpisodeSummary {
  int episode = 0;
  long long global_step = 0;  // steps taken when the episode ended
  int steps = 0;
  double cumulative_reward = 0.0;
  EpisodeKind kind = EpisodeKind::running;
  double sigma = 0.0;
};

struct ValidationSummary {
  int after_episode = 0;
  long long global_step = 0;
  double mean_reward = 0.0;
  double finish_rate = 0.0;
  double collision_rate = 0.0;
};

struct TrainProgress {
  long long global_step = 0;
  int episodes = 0;
  UpdateStats update;
  std::optional<ValidationSummary> validation;
};

struct TrainResult {
  std::vector<EpisodeSummary> episodes;
  std::vector<ValidationSummary> validations;
  std::vector<std::filesystem::path> candidate_paths;  // in episode order
  std::filesystem::path final_path;
  long long global_step = 0;
};

// Greedy (sigma = 0) rollouts; returns the mean cumulative reward.
struct PolicyEvaluation {
  double mean_reward = 0.0;
  double finish_rate = 0.0;
  double collision_rate = 0.0;
};
PolicyEvaluation evaluate_policy(const PolicyParams& params, const ExperimentConfig& config,
                                 int episodes);

// Trains into `out_dir`: episodes.csv, validation.csv, candidate_*.ckpt and
// final.ckpt (each with a manifest). On divergence the files written so far
// stay on disk, a diverged.txt note is added and TrainingDiverged is
// rethrown.
TrainResult train_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const TrainProgress&)>& progress = {});

struct Selection {
  std::size_t index = 0;
  std::vector<double> validation_means;
  Checkpoint best;
};

// Validates every candidate with sigma = 0 on the same episodes and picks
// the highest mean; a single candidate is returned without validation.
// Throws CheckpointError when a path is missing.
Selection select_best(std::span<const std::filesystem::path> candidates,
                      const ExperimentConfig& config);

struct TestOptions {
  int episodes = 60;
  std::uint64_t seed = 7;
  // Evaluate a scenario-3 policy with correct perception (case VEVV, so the
  // uncertainty channel is all zeros).
  bool scenario4 = false;
  std::optional<std::filesystem::path> log_dir;
};

struct TestResult {
  BehaviorMetrics metrics;
  std::vector<EpisodeLog> logs;  // ordered by episode index
};

// Deterministic test episodes under `cases`. The network's input size fixes
// informedness. Throws std::invalid_argument on shape or case mismatch.
TestResult test_policy(const Checkpoint& policy, CaseSpec cases, const TestOptions& options);

// Runs one greedy episode and returns its full log.
EpisodeLog run_episode(DrivingEnv& env, const PolicyParams& params, int scenario,
                       int episode_index, std::uint64_t world_seed,
                       std::uint64_t schedule_seed);

}  // namespace uadrive

#endif  // UADRIVE_EXPERIMENT_HPP_
