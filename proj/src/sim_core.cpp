#include "uadrive/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace uadrive {

namespace {

// Minimum bumper clearance the scripted vehicles will ever accept.
constexpr double kGuardClearance = 0.5;

// Safety margin for f1 closing in on f2, on top of its stopping distance.
constexpr double kFrontSafetyMargin = 2.0;

double cruise_throttle(double velocity, double target) {
  if (target <= 0.0) return 0.0;
  return std::clamp((target - velocity) / target, 0.0, 1.0);
}

VehicleState integrate(const VehicleState& state, double a,
                       const WorldConfig& config) {
  VehicleState next = state;
  const double accel = a >= 0.0 ? a * config.max_accel : a * config.max_decel;
  next.velocity_mps =
      std::clamp(state.velocity_mps + accel * config.dt, 0.0, config.v_cap);
  next.position_m = state.position_m + next.velocity_mps * config.dt;
  next.last_action = a;
  return next;
}

// Pulls `follower` back so it keeps kGuardClearance to `leader`.
void enforce_clearance(VehicleState& follower, const VehicleState& leader) {
  const double limit = leader.rear() - kGuardClearance - 0.5 * follower.length_m;
  if (follower.position_m > limit) {
    follower.position_m = limit;
    follower.velocity_mps = std::min(follower.velocity_mps, leader.velocity_mps);
  }
}

}  // namespace

std::string_view role_name(Role role) {
  switch (role) {
    case Role::ego: return "ego";
    case Role::f1: return "f1";
    case Role::f2: return "f2";
    case Role::b: return "b";
  }
  return "?";
}

Role parse_role(std::string_view name) {
  if (name == "ego") return Role::ego;
  if (name == "f1") return Role::f1;
  if (name == "f2") return Role::f2;
  if (name == "b") return Role::b;
  throw ConfigError("unknown vehicle role '" + std::string(name) + "'");
}

std::string_view kind_name(EpisodeKind kind) {
  switch (kind) {
    case EpisodeKind::running: return "running";
    case EpisodeKind::finished: return "finished";
    case EpisodeKind::collided: return "collided";
    case EpisodeKind::timeout: return "timeout";
    case EpisodeKind::stalled: return "stalled";
    case EpisodeKind::aborted: return "aborted";
  }
  return "?";
}

EpisodeKind parse_kind(std::string_view name) {
  for (auto kind : {EpisodeKind::running, EpisodeKind::finished,
                    EpisodeKind::collided, EpisodeKind::timeout,
                    EpisodeKind::stalled, EpisodeKind::aborted}) {
    if (kind_name(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown episode kind '" + std::string(name) +
                              "'");
}

void WorldConfig::validate() const {
  if (!(route_length_m > 0.0)) throw ConfigError("route_length_m must be > 0");
  if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
  if (t_bound <= 0 || t_max < t_bound)
    throw ConfigError("need t_max >= t_bound > 0");
  if (min_start_distance_m < 0.0)
    throw ConfigError("min_start_distance_m must be >= 0");
  if (front_brake_period <= 0)
    throw ConfigError("front_brake_period must be > 0");
  if (!(front_brake_duty > 0.0 && front_brake_duty < 1.0))
    throw ConfigError("front_brake_duty must lie in (0, 1)");
  if (!(front_brake_command >= -1.0 && front_brake_command < 0.0))
    throw ConfigError("front_brake_command must lie in [-1, 0)");
  if (front_cruise_speed < 0.0)
    throw ConfigError("front_cruise_speed must be >= 0");
  if (front_phase_jitter < 0)
    throw ConfigError("front_phase_jitter must be >= 0");
  if (!(max_accel > 0.0) || !(max_decel > 0.0) || !(v_cap > 0.0))
    throw ConfigError("max_accel, max_decel and v_cap must be > 0");
  if (!(vehicle_length_m > 0.0))
    throw ConfigError("vehicle_length_m must be > 0");
  if (follower_gap_m < 0.0) throw ConfigError("follower_gap_m must be >= 0");

  if (spawn_positions.size() != kNumVehicles)
    throw ConfigError("spawn_positions must list b, ego, f1 and f2 once each");
  std::array<const SpawnSpec*, kNumVehicles> by_role{};
  for (const auto& spec : spawn_positions) {
    auto& slot = by_role[static_cast<std::size_t>(spec.role)];
    if (slot != nullptr)
      throw ConfigError("duplicate spawn role '" +
                        std::string(role_name(spec.role)) + "'");
    if (spec.speed_mps < 0.0 || spec.speed_mps > v_cap)
      throw ConfigError("spawn speed outside [0, v_cap]");
    slot = &spec;
  }
  // Lane order is b < ego < f1 < f2 with disjoint bodies.
  const std::array<Role, kNumVehicles> order = {Role::b, Role::ego, Role::f1,
                                                Role::f2};
  for (std::size_t i = 1; i < order.size(); ++i) {
    const double behind = by_role[static_cast<std::size_t>(order[i - 1])]->offset_m;
    const double ahead = by_role[static_cast<std::size_t>(order[i])]->offset_m;
    if (!(ahead - behind > vehicle_length_m))
      throw ConfigError("spawn offsets must be ordered b < ego < f1 < f2 "
                        "without overlap");
  }
}

double apply_inertia(double a_tilde, double a_prev) {
  if (!(a_tilde >= -1.0 && a_tilde <= 1.0) ||
      !(a_prev >= -1.0 && a_prev <= 1.0)) {
    throw std::domain_error("apply_inertia: inputs must lie in [-1, 1]");
  }
  const bool same_sign = (a_tilde >= 0.0) == (a_prev >= 0.0);
  if (!same_sign) return 0.9 * a_tilde;
  return 0.9 * a_tilde + 0.1 * a_prev;
}

VehicleState step_ego(const VehicleState& state, double a,
                      const WorldConfig& config) {
  if (!(a >= -1.0 && a <= 1.0))
    throw std::domain_error("step_ego: action must lie in [-1, 1]");
  return integrate(state, a, config);
}

double front_vehicle_controller(const WorldState& world, Role role, int t,
                                const WorldConfig& config) {
  switch (role) {
    case Role::ego:
      throw std::invalid_argument(
          "front_vehicle_controller: the ego is not scripted");
    case Role::f1:
    case Role::f2: {
      const VehicleState& self = world.vehicle(role);
      const int period = config.front_brake_period;
      const int shift = role == Role::f2 ? period / 2 : 0;
      const long long phase =
          (static_cast<long long>(t) + world.phase_offset + shift) % period;
      const auto brake_steps = static_cast<long long>(
          std::lround(config.front_brake_duty * period));
      double command = phase < brake_steps
                           ? config.front_brake_command
                           : cruise_throttle(self.velocity_mps,
                                             config.front_cruise_speed);
      if (role == Role::f1) {
        const VehicleState& lead = world.vehicle(Role::f2);
        const double clearance = lead.rear() - self.front();
        const double v = self.velocity_mps;
        const double stopping = v * v / (2.0 * config.max_decel);
        if (v > lead.velocity_mps &&
            clearance < kFrontSafetyMargin + stopping) {
          command = -1.0;
        }
      }
      return command;
    }
    case Role::b: {
      const VehicleState& self = world.vehicle(Role::b);
      const VehicleState& ego = world.ego();
      const double clearance = ego.rear() - self.front();
      if (clearance < config.follower_gap_m) return -1.0;
      const double target = std::min(
          config.v_cap,
          ego.velocity_mps + 0.5 * (clearance - config.follower_gap_m - 2.0));
      return cruise_throttle(self.velocity_mps, std::max(target, 0.0));
    }
  }
  throw std::invalid_argument("front_vehicle_controller: unknown role");
}

bool detect_collision(const WorldState& world) {
  for (std::size_t i = 0; i < kNumVehicles; ++i) {
    for (std::size_t j = i + 1; j < kNumVehicles; ++j) {
      const auto& u = world.vehicles[i];
      const auto& v = world.vehicles[j];
      if (u.rear() < v.front() && v.rear() < u.front()) return true;
    }
  }
  return false;
}

EpisodeStatus check_termination(const WorldState& world,
                                const WorldConfig& config) {
  EpisodeKind kind = EpisodeKind::running;
  if (detect_collision(world)) {
    kind = EpisodeKind::collided;
  } else if (world.ego().position_m >= config.route_length_m) {
    kind = EpisodeKind::finished;
  } else if (world.t >= config.t_bound &&
             world.traveled_m() < config.min_start_distance_m) {
    kind = EpisodeKind::stalled;
  } else if (world.t >= config.t_max) {
    kind = EpisodeKind::timeout;
  }
  EpisodeStatus status;
  status.kind = kind;
  status.terminal = kind != EpisodeKind::running;
  status.t_terminal = status.terminal ? world.t : -1;
  return status;
}

WorldState reset(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  WorldState world;
  for (const auto& spec : config.spawn_positions) {
    VehicleState& v = world.vehicle(spec.role);
    v.role = spec.role;
    v.position_m = spec.offset_m;
    v.velocity_mps = spec.speed_mps;
    v.length_m = config.vehicle_length_m;
    v.last_action = 0.0;
  }
  world.ego_start_m = world.ego().position_m;
  if (config.front_phase_jitter > 0) {
    std::mt19937_64 rng(seed);
    world.phase_offset = static_cast<int>(
        rng() % static_cast<std::uint64_t>(config.front_phase_jitter));
  }
  return world;
}

void step_world(WorldState& world, double a, const WorldConfig& config) {
  if (world.status != EpisodeKind::running)
    throw std::logic_error("step_world: episode already terminated");

  const double cmd_f1 = front_vehicle_controller(world, Role::f1, world.t, config);
  const double cmd_f2 = front_vehicle_controller(world, Role::f2, world.t, config);
  const double cmd_b = front_vehicle_controller(world, Role::b, world.t, config);

  world.vehicle(Role::ego) = step_ego(world.ego(), a, config);
  world.vehicle(Role::f2) = integrate(world.vehicle(Role::f2), cmd_f2, config);
  world.vehicle(Role::f1) = integrate(world.vehicle(Role::f1), cmd_f1, config);
  world.vehicle(Role::b) = integrate(world.vehicle(Role::b), cmd_b, config);
  enforce_clearance(world.vehicle(Role::f1), world.vehicle(Role::f2));
  enforce_clearance(world.vehicle(Role::b), world.ego());

  ++world.t;
  world.status = check_termination(world, config).kind;
}

double front_gap_m(const WorldState& world) {
  const VehicleState& ego = world.ego();
  double gap = std::numeric_limits<double>::infinity();
  for (Role role : {Role::f1, Role::f2}) {
    const VehicleState& v = world.vehicle(role);
    if (v.position_m > ego.position_m) gap = std::min(gap, v.rear() - ego.front());
  }
  return gap;
}

}  // namespace uadrive
