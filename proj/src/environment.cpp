#include "uadrive/environment.hpp"

#include <cctype>
#include <stdexcept>

namespace uadrive {

std::string CaseSpec::tag() const {
  if (mixed) return "mpc";
  std::string out(case_tag(fixed));
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

CaseSpec parse_case_spec(std::string_view tag) {
  if (tag == "mpc" || tag == "MPC") return CaseSpec::mpc();
  return CaseSpec::single(parse_case(tag));
}

DrivingEnv::DrivingEnv(WorldConfig world_config, RewardParams reward,
                       bool informed, CaseSpec cases)
    : world_config_(std::move(world_config)),
      reward_(reward),
      informed_(informed),
      cases_(cases) {
  world_config_.validate();
  reward_.validate();
}

PerturbationCase DrivingEnv::case_at(int t) const {
  return cases_.mixed ? current_case(schedule_, t) : cases_.fixed;
}

void DrivingEnv::observe() {
  perturbation_ = case_at(world_.t);
  grid_ = apply_perturbation(render_bev(world_, world_config_), perturbation_, world_);
  observation_ = assemble_observation(grid_, world_, world_.ego().last_action,
                                      perturbation_, informed_, world_config_);
}

const Observation& DrivingEnv::reset(std::uint64_t world_seed,
                                     std::uint64_t schedule_seed) {
  world_seed_ = world_seed;
  schedule_seed_ = schedule_seed;
  world_ = uadrive::reset(world_config_, world_seed);
  schedule_ = cases_.mixed
                  ? sample_mpc_schedule(schedule_seed, world_config_.t_max + 1)
                  : MpcSchedule{};
  observe();
  return observation_;
}

EnvStep DrivingEnv::step(double a_tilde) {
  if (done()) throw std::logic_error("DrivingEnv::step: episode has terminated");
  const double loc_prev = world_.ego().position_m;
  const double a = apply_inertia(a_tilde, world_.ego().last_action);
  step_world(world_, a, world_config_);

  EnvStep out;
  out.a_tilde = a_tilde;
  out.a = a;
  out.status = check_termination(world_, world_config_);
  const double v_mom = momentary_speed(loc_prev, world_.ego().position_m,
                                       world_config_.route_length_m);
  out.reward = compute_reward(world_.t, v_mom, out.status, reward_);
  observe();
  out.observation = observation_;
  out.grid = grid_;
  out.perturbation = perturbation_;
  out.front_gap = front_gap_m(world_);
  return out;
}

}  // namespace uadrive
