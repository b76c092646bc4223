#ifndef UADRIVE_SIM_CORE_HPP_
#define UADRIVE_SIM_CORE_HPP_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace uadrive {

// Thrown for invalid world/experiment configuration (bad layout, bad keys).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Scene vehicles. The enumerator value doubles as the slot index inside
// WorldState::vehicles.
enum class Role : std::uint8_t { ego = 0, f1 = 1, f2 = 2, b = 3 };

inline constexpr std::size_t kNumVehicles = 4;

std::string_view role_name(Role role);
Role parse_role(std::string_view name);

struct SpawnSpec {
  Role role = Role::ego;
  double offset_m = 0.0;
  double speed_mps = 0.0;
};

struct WorldConfig {
  double route_length_m = 150.0;
  double dt = 0.05;
  int t_max = 7500;
  int t_bound = 500;
  double min_start_distance_m = 3.0;
  std::vector<SpawnSpec> spawn_positions = {{Role::b, -12.0, 0.0},
                                            {Role::ego, 0.0, 0.0},
                                            {Role::f1, 15.0, 0.0},
                                            {Role::f2, 30.0, 0.0}};
  int front_brake_period = 200;
  double front_brake_duty = 0.3;
  double front_brake_command = -0.5;  // in [-1, 0)
  double front_cruise_speed = 8.0;
  // Per-episode braking phase is drawn from [0, front_phase_jitter) steps.
  int front_phase_jitter = 200;
  std::uint64_t seed = 0;

  double max_accel = 3.5;   // m/s^2 at a = +1
  double max_decel = 8.0;   // m/s^2 at a = -1
  double v_cap = 20.0;      // m/s
  double vehicle_length_m = 4.5;
  double follower_gap_m = 6.0;

  // Throws ConfigError on any violated invariant.
  void validate() const;
};

struct VehicleState {
  Role role = Role::ego;
  double position_m = 0.0;
  double velocity_mps = 0.0;
  double length_m = 4.5;
  double last_action = 0.0;

  double rear() const { return position_m - 0.5 * length_m; }
  double front() const { return position_m + 0.5 * length_m; }

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

enum class EpisodeKind : std::uint8_t {
  running,
  finished,
  collided,
  timeout,
  stalled,
  aborted,  // teleop sessions only
};

std::string_view kind_name(EpisodeKind kind);
EpisodeKind parse_kind(std::string_view name);

struct EpisodeStatus {
  bool terminal = false;
  EpisodeKind kind = EpisodeKind::running;
  int t_terminal = -1;
};

struct WorldState {
  int t = 0;
  std::array<VehicleState, kNumVehicles> vehicles{};
  EpisodeKind status = EpisodeKind::running;
  // Shift applied to the front vehicles' braking wave for this episode.
  int phase_offset = 0;
  double ego_start_m = 0.0;

  VehicleState& vehicle(Role role) {
    return vehicles[static_cast<std::size_t>(role)];
  }
  const VehicleState& vehicle(Role role) const {
    return vehicles[static_cast<std::size_t>(role)];
  }
  const VehicleState& ego() const { return vehicle(Role::ego); }
  double traveled_m() const { return ego().position_m - ego_start_m; }

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

// Inertia filter on the policy's raw command. sgn(0) is taken as +1.
// Throws std::domain_error when either input leaves [-1, 1].
double apply_inertia(double a_tilde, double a_prev);

// Point-mass longitudinal update for the ego with the filtered action.
VehicleState step_ego(const VehicleState& state, double a,
                      const WorldConfig& config);

// Scripted command for f1, f2 or b at step t. Throws std::invalid_argument
// for the ego.
double front_vehicle_controller(const WorldState& world, Role role, int t,
                                const WorldConfig& config);

bool detect_collision(const WorldState& world);

EpisodeStatus check_termination(const WorldState& world,
                                const WorldConfig& config);

WorldState reset(const WorldConfig& config, std::uint64_t seed);

// Advances every vehicle by one step (ego driven by the filtered action `a`)
// and updates the status. Throws std::logic_error on a terminal world.
void step_world(WorldState& world, double a, const WorldConfig& config);

// Bumper gap from the ego's front to the rear of the nearest true front
// vehicle. Returns +inf when no vehicle is ahead.
double front_gap_m(const WorldState& world);

}  // namespace uadrive

#endif  // UADRIVE_SIM_CORE_HPP_
