#include <cmath>
#include <set>

#include "doctest.h"
#include "uadrive/environment.hpp"

using namespace uadrive;

TEST_CASE("uncertainty one-hot follows the case listing order") {
  CHECK(encode_uncertainty(PerturbationCase::VEXV, true) == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(encode_uncertainty(PerturbationCase::XEVV, true) == std::vector<std::uint8_t>{0, 1, 0, 0});
  CHECK(encode_uncertainty(PerturbationCase::VEXX, true) == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK(encode_uncertainty(PerturbationCase::XEXX, true) == std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK(encode_uncertainty(PerturbationCase::VEVV, true) == std::vector<std::uint8_t>{0, 0, 0, 0});
  CHECK(encode_uncertainty(PerturbationCase::VEXV, false).empty());
}

TEST_CASE("observation lengths per scenario") {
  CHECK(observation_size(false) == 106);
  CHECK(observation_size(true) == 110);
  for (int id = 1; id <= 4; ++id) {
    const ScenarioCase s = scenario_case(id);
    CHECK(observation_size(s.informed) == (id >= 3 ? 110 : 106));
  }
  CHECK_THROWS_AS(scenario_case(5), std::invalid_argument);
  CHECK_FALSE(scenario_case(2).informed);
  CHECK(scenario_case(4).informed);
  CHECK_FALSE(scenario_case(4).perturbed);
}

TEST_CASE("assembled observation splits the filtered command into throttle and brake") {
  WorldConfig c;
  WorldState w = reset(c, 0);
  w.vehicle(Role::ego).velocity_mps = 10.0;
  const SemanticGrid g = render_bev(w, c);
  Observation o = assemble_observation(g, w, -0.4, PerturbationCase::VEVV, false, c);
  CHECK(o.size() == 106);
  CHECK(o.non_visual[0] == 0.0);
  CHECK(o.non_visual[1] == doctest::Approx(0.4));
  CHECK(o.non_visual[2] == 10.0);
  CHECK(o.non_visual[3] == doctest::Approx(0.5));
  o = assemble_observation(g, w, 0.3, PerturbationCase::VEXV, true, c);
  CHECK(o.size() == 110);
  CHECK(o.non_visual[0] == doctest::Approx(0.3));
  CHECK(o.non_visual[1] == 0.0);
  CHECK(o.uncertainty == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(grid_from_vision(o.vision) == g);
}

TEST_CASE("gray palette is distinct per class") {
  CHECK(grayscale(CellClass::road) != grayscale(CellClass::lane_marking));
  CHECK(grayscale(CellClass::ego_vehicle) != grayscale(CellClass::other_vehicle));
  std::array<std::uint8_t, kVisionSize> v{};
  v.fill(grayscale(CellClass::road));
  v[7] = 1;
  CHECK_THROWS_AS(grid_from_vision(v), std::invalid_argument);
}

TEST_CASE("terminal rewards") {
  const RewardParams p;
  for (auto kind : {EpisodeKind::collided, EpisodeKind::timeout, EpisodeKind::stalled,
                    EpisodeKind::aborted}) {
    EpisodeStatus s{true, kind, 10};
    CHECK(compute_reward(10, 0.4, s, p) == -50.0);
  }
  EpisodeStatus done{true, EpisodeKind::finished, 300};
  CHECK(compute_reward(300, 0.4, done, p) == 100.0);
}

TEST_CASE("per-step weight starts at 5 and decreases strictly") {
  const RewardParams p;
  const EpisodeStatus running;
  CHECK(compute_reward(0, 0.37, running, p) == 5.0 * 0.37);
  double prev = time_weight(0, p);
  CHECK(prev == 5.0);
  for (int t = 1; t <= p.t_max; ++t) {
    const double w = time_weight(t, p);
    CHECK_UNARY(w < prev);
    prev = w;
  }
  CHECK(time_weight(p.t_max, p) == doctest::Approx(3.0));
  CHECK_THROWS_AS(compute_reward(-1, 0.0, running, p), std::invalid_argument);
}

TEST_CASE("momentary speed is progress toward the target") {
  CHECK(momentary_speed(10.0, 10.4, 150.0) == doctest::Approx(0.4));
  CHECK(momentary_speed(10.4, 10.0, 150.0) == doctest::Approx(-0.4));
  CHECK(momentary_speed(149.8, 150.2, 150.0) == doctest::Approx(0.0));
  const std::vector<double> r{1.0, 2.5, -0.5};
  CHECK(cumulative_reward(r) == 3.0);
}

TEST_CASE("reward constants must be positive") {
  RewardParams p;
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("environment step applies inertia and rewards progress") {
  DrivingEnv env(WorldConfig{}, RewardParams{}, false, CaseSpec::single(PerturbationCase::VEVV));
  env.reset(1, 1);
  CHECK(env.observation().size() == 106);
  const EnvStep s1 = env.step(1.0);
  CHECK(s1.a == doctest::Approx(0.9));
  const double x1 = env.world().ego().position_m;
  CHECK(s1.reward == doctest::Approx(time_weight(1, RewardParams{}) * x1));
  const EnvStep s2 = env.step(1.0);
  CHECK(s2.a == doctest::Approx(0.99));
  const EnvStep s3 = env.step(-1.0);
  CHECK(s3.a == doctest::Approx(-0.9));
  CHECK(env.observation().non_visual[1] == doctest::Approx(0.9));
  CHECK_THROWS_AS(env.step(2.0), std::domain_error);
}

TEST_CASE("informed environment reports the active case; mixed schedules change it") {
  DrivingEnv env(WorldConfig{}, RewardParams{}, true, CaseSpec::mpc());
  std::set<PerturbationCase> seen;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    env.reset(3, seed);
    CHECK(env.observation().size() == 110);
    for (int k = 0; k < 2000 && !env.done(); ++k) {
      const EnvStep s = env.step(0.2);
      CHECK(s.perturbation == current_case(env.schedule(), env.world().t));
      CHECK(s.observation.uncertainty == encode_uncertainty(s.perturbation, true));
      seen.insert(s.perturbation);
    }
  }
  CHECK(seen.size() >= 2);
}

TEST_CASE("environment refuses to step past termination") {
  WorldConfig c;
  c.t_bound = 5;
  c.t_max = 5;
  DrivingEnv env(c, RewardParams{}, false, CaseSpec::single(PerturbationCase::VEVV));
  env.reset(0, 0);
  EnvStep last;
  while (!env.done()) last = env.step(0.0);
  CHECK(last.status.kind == EpisodeKind::stalled);
  CHECK(last.reward == -50.0);
  CHECK_THROWS_AS(env.step(0.0), std::logic_error);
}

TEST_CASE("case spec tags") {
  CHECK(CaseSpec::mpc().tag() == "mpc");
  CHECK(CaseSpec::single(PerturbationCase::VEXX).tag() == "vexx");
  CHECK(parse_case_spec("MPC") == CaseSpec::mpc());
  CHECK(parse_case_spec("xexx") == CaseSpec::single(PerturbationCase::XEXX));
  CHECK_THROWS_AS(parse_case_spec("nope"), std::invalid_argument);
}
