#ifndef UADRIVE_ENVIRONMENT_HPP_
#define UADRIVE_ENVIRONMENT_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "uadrive/observation.hpp"
#include "uadrive/perception.hpp"
#include "uadrive/reward.hpp"
#include "uadrive/sim_core.hpp"

namespace uadrive {

// Either one fixed perturbation case for the whole episode or the mixed
// case (a fresh randomized schedule per episode).
struct CaseSpec {
  bool mixed = false;
  PerturbationCase fixed = PerturbationCase::VEVV;

  static CaseSpec mpc() { return {true, PerturbationCase::VEVV}; }
  static CaseSpec single(PerturbationCase c) { return {false, c}; }

  // "mpc" or the lower-case case tag.
  std::string tag() const;
  friend bool operator==(const CaseSpec&, const CaseSpec&) = default;
};

// Throws std::invalid_argument for unknown tags.
CaseSpec parse_case_spec(std::string_view tag);

struct EnvStep {
  Observation observation;
  SemanticGrid grid;  // perturbed grid behind `observation`
  double a_tilde = 0.0;
  double a = 0.0;  // inertia-filtered command applied to the ego
  double reward = 0.0;
  EpisodeStatus status;
  PerturbationCase perturbation = PerturbationCase::VEVV;
  double front_gap = 0.0;
};

// One world plus the perception/observation/reward pipeline of an agent.
// Single-threaded; instances share nothing.
class DrivingEnv {
 public:
  DrivingEnv(WorldConfig world_config, RewardParams reward, bool informed,
             CaseSpec cases);

  // Returns the observation at t = 0.
  const Observation& reset(std::uint64_t world_seed, std::uint64_t schedule_seed);

  // `a_tilde` must lie in [-1, 1]. Throws std::logic_error after the
  // episode has terminated.
  EnvStep step(double a_tilde);

  const WorldState& world() const { return world_; }
  const WorldConfig& world_config() const { return world_config_; }
  const RewardParams& reward_params() const { return reward_; }
  const MpcSchedule& schedule() const { return schedule_; }
  const Observation& observation() const { return observation_; }
  const SemanticGrid& grid() const { return grid_; }
  PerturbationCase perturbation() const { return perturbation_; }
  CaseSpec cases() const { return cases_; }
  bool informed() const { return informed_; }
  bool done() const { return world_.status != EpisodeKind::running; }
  std::uint64_t world_seed() const { return world_seed_; }
  std::uint64_t schedule_seed() const { return schedule_seed_; }

 private:
  PerturbationCase case_at(int t) const;
  void observe();

  WorldConfig world_config_;
  RewardParams reward_;
  bool informed_;
  CaseSpec cases_;
  WorldState world_;
  MpcSchedule schedule_;
  Observation observation_;
  SemanticGrid grid_;
  PerturbationCase perturbation_ = PerturbationCase::VEVV;
  std::uint64_t world_seed_ = 0;
  std::uint64_t schedule_seed_ = 0;
};

}  // namespace uadrive

#endif  // UADRIVE_ENVIRONMENT_HPP_
