#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "uadrive/experiment.hpp"
#include "uadrive/manifest.hpp"

using namespace uadrive;
using uadrive::testing::TempDir;

namespace {

ExperimentConfig small_config(int scenario, long long steps) {
  ExperimentConfig c;
  c.scenario = scenario;
  c.total_steps = steps;
  c.hyper.hidden_size = 16;
  c.hyper.rollout_length = 512;
  c.hyper.minibatch_size = 128;
  c.validate_every_n_episodes = 5;
  c.validation_episodes = 2;
  c.initial_mu = 0.3;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Checkpoint random_checkpoint(int scenario) {
  const ExperimentConfig c = small_config(scenario, 1000);
  Checkpoint k;
  k.scenario = scenario;
  k.informed = c.informed();
  k.params = PolicyParams::initialized(observation_size(k.informed), 16, 4, 0.2);
  k.hyper = c.hyper;
  k.world = c.world;
  k.reward = c.reward;
  k.global_step = 12345;
  k.episode = 17;
  k.episode_return = 321.5;
  k.seed = 99;
  k.config_hash = config_hash(c.keys());
  return k;
}

}  // namespace

TEST_CASE("top-3 selection over [5, 9, 3, 9, 7] keeps the episodes with 9, 9 and 7") {
  const std::vector<double> r{5, 9, 3, 9, 7};
  CHECK(top_k_indices(r, 3) == std::vector<std::size_t>{1, 3, 4});
  CHECK(top_k_indices(r, 10).size() == 5);
  const std::vector<double> ties{1, 1, 1, 1};
  CHECK(top_k_indices(ties, 2) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("best candidate is the argmax with ties going to the earliest") {
  CHECK(select_best_index(std::vector<double>{12.1, 40.0, 39.9}) == 1);
  CHECK(select_best_index(std::vector<double>{40.0, 40.0, 1.0}) == 0);
  CHECK_THROWS_AS(select_best_index(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("a single surviving candidate is returned without validation") {
  TempDir dir("single");
  const Checkpoint k = random_checkpoint(1);
  save_checkpoint(k, dir / "only.ckpt");
  const std::vector<std::filesystem::path> paths{dir / "only.ckpt"};
  const Selection s = select_best(paths, small_config(1, 1000));
  CHECK(s.index == 0);
  CHECK(s.validation_means.empty());
  CHECK(s.best.params.flat == k.params.flat);
}

TEST_CASE("selection fails on missing checkpoints") {
  TempDir dir("missing");
  const std::vector<std::filesystem::path> paths{dir / "a.ckpt", dir / "b.ckpt"};
  CHECK_THROWS_AS(select_best(paths, small_config(1, 1000)), CheckpointError);
  CHECK_THROWS_AS(select_best(std::span<const std::filesystem::path>{}, small_config(1, 1000)),
                  CheckpointError);
}

TEST_CASE("checkpoints round-trip and reject corruption") {
  TempDir dir("ckpt");
  const Checkpoint k = random_checkpoint(3);
  save_checkpoint(k, dir / "k.ckpt");
  const Checkpoint back = load_checkpoint(dir / "k.ckpt");
  CHECK(back.params.flat == k.params.flat);
  CHECK(back.params.input_size == 110);
  CHECK(back.informed);
  CHECK(back.scenario == 3);
  CHECK(back.global_step == k.global_step);
  CHECK(back.episode == k.episode);
  CHECK(back.episode_return == k.episode_return);
  CHECK(back.config_hash == k.config_hash);
  CHECK(ppo_keys(back.hyper) == ppo_keys(k.hyper));
  CHECK(world_config_keys(back.world) == world_config_keys(k.world));
  CHECK_FALSE(std::filesystem::exists(dir / "k.ckpt.tmp"));

  std::string bytes = slurp(dir / "k.ckpt");
  auto write = [&](const std::string& b) {
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out << b;
  };
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  write(flipped);
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  write(bytes.substr(0, bytes.size() - 20));
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  write(magic);
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), CheckpointError);

  write_checkpoint_manifest(k, dir / "k.ckpt");
  CHECK(std::filesystem::exists(dir / "k.ckpt.manifest.txt"));
}

TEST_CASE("experiment configs parse, pin the scenario and reject unknown keys") {
  KeyValues kv{{"seed", "5"},           {"total_steps", "1000"}, {"optimizer", "adam"},
               {"front_brake_command", "-0.25"}, {"reward.alpha", "40"},
               {"scenario", "2"}};
  const ExperimentConfig c = experiment_config_from_keys(kv, 2);
  CHECK(c.seed == 5);
  CHECK(c.total_steps == 1000);
  CHECK(c.hyper.optimizer == OptimizerKind::adam);
  CHECK(c.world.front_brake_command == -0.25);
  CHECK(c.reward.alpha == 40.0);
  CHECK(c.training_case() == CaseSpec::mpc());
  CHECK_FALSE(c.informed());
  CHECK(experiment_config_from_keys({}, 1).training_case() ==
        CaseSpec::single(PerturbationCase::VEVV));
  CHECK(experiment_config_from_keys({}, 3).informed());
  CHECK_THROWS_AS(experiment_config_from_keys(kv, 3), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_keys({{"bogus", "1"}}, 1), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_keys({}, 4), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_keys({{"total_steps", "-3"}}, 1), ConfigError);
  CHECK_THROWS_AS(experiment_config_from_keys({{"reward.t_max", "10"}}, 1), ConfigError);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/uadrive.cfg", 1), ConfigError);
}

TEST_CASE("seed streams for training, validation and test are disjoint") {
  std::set<std::uint64_t> seen;
  for (int e = 0; e < 100; ++e) {
    seen.insert(train_world_seed(1, e));
    seen.insert(validation_world_seed(1, e));
    seen.insert(test_world_seed(1, e));
    seen.insert(train_schedule_seed(1, e));
    seen.insert(validation_schedule_seed(1, e));
    seen.insert(test_schedule_seed(1, e));
  }
  CHECK(seen.size() == 600);
}

TEST_CASE("smoke training run leaves checkpoints and parseable logs") {
  TempDir dir("smoke");
  const ExperimentConfig c = small_config(3, 10'000);
  const TrainResult r = train_experiment(c, dir.path());
  CHECK(r.global_step == 10'000);
  REQUIRE_FALSE(r.candidate_paths.empty());
  CHECK(r.candidate_paths.size() <= 3);
  for (const auto& p : r.candidate_paths) {
    const Checkpoint k = load_checkpoint(p);
    CHECK(k.params.input_size == 110);
    CHECK(std::filesystem::exists(p.string() + ".manifest.txt"));
  }
  CHECK(load_checkpoint(r.final_path).global_step == 10'000);

  std::ifstream csv(dir / "episodes.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "episode,global_step,steps,kind,cumulative_reward,sigma");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 5);
    ++rows;
  }
  CHECK(rows == static_cast<int>(r.episodes.size()));
  CHECK(rows >= 1);
  CHECK(r.validations.size() == r.episodes.size() / 5);

  // Candidates are the top returns over the whole run, in episode order.
  std::vector<double> returns;
  for (const auto& e : r.episodes) returns.push_back(e.cumulative_reward);
  const auto best = top_k_indices(returns, 3);
  REQUIRE(best.size() == r.candidate_paths.size());
  for (std::size_t i = 0; i < best.size(); ++i)
    CHECK(load_checkpoint(r.candidate_paths[i]).episode == static_cast<int>(best[i]));
}

TEST_CASE("validation snapshots join the candidate set") {
  TempDir dir("valcand");
  ExperimentConfig c = small_config(1, 10'000);
  c.candidates = 1;
  c.validation_candidates = 2;
  const TrainResult r = train_experiment(c, dir.path());
  REQUIRE(r.validations.size() >= 2);

  std::vector<double> returns;
  for (const auto& e : r.episodes) returns.push_back(e.cumulative_reward);
  std::vector<double> means;
  for (const auto& v : r.validations) means.push_back(v.mean_reward);
  std::set<int> expected;
  for (std::size_t i : top_k_indices(returns, 1)) expected.insert(static_cast<int>(i));
  for (std::size_t i : top_k_indices(means, 2)) expected.insert(r.validations[i].after_episode - 1);

  std::set<int> got;
  for (const auto& p : r.candidate_paths) got.insert(load_checkpoint(p).episode);
  CHECK(got == expected);
  CHECK(r.candidate_paths.size() == expected.size());
}

TEST_CASE("two runs with the same seeds write identical reward logs") {
  TempDir a("det_a"), b("det_b");
  const ExperimentConfig c = small_config(2, 6'000);
  train_experiment(c, a.path());
  train_experiment(c, b.path());
  CHECK(slurp(a / "episodes.csv") == slurp(b / "episodes.csv"));
  CHECK(slurp(a / "final.ckpt") == slurp(b / "final.ckpt"));
}

TEST_CASE("diverging training keeps its artifacts and reports the failure") {
  TempDir dir("diverge");
  ExperimentConfig c = small_config(1, 20'000);
  c.hyper.optimizer = OptimizerKind::sgd;
  c.hyper.learning_rate = 1e200;
  CHECK_THROWS_AS(train_experiment(c, dir.path()), TrainingDiverged);
  CHECK(std::filesystem::exists(dir / "diverged.txt"));
  CHECK(std::filesystem::exists(dir / "episodes.csv"));
}

TEST_CASE("testing a policy yields 60 fully logged, replayable episodes") {
  TempDir dir("testpolicy");
  const Checkpoint k = random_checkpoint(2);
  TestOptions o;
  o.log_dir = dir / "logs";
  const TestResult r = test_policy(k, CaseSpec::mpc(), o);
  CHECK(r.metrics.episodes == 60);
  CHECK(r.metrics.traveled_distance_m.values.size() == 60);
  CHECK(r.metrics.episode_steps.values.size() == 60);
  CHECK(r.metrics.brake_to_throttle_ratio.values.size() == 60);
  CHECK(r.metrics.finish_rate + r.metrics.collision_rate + r.metrics.timeout_rate +
            r.metrics.stalled_rate ==
        doctest::Approx(1.0));
  REQUIRE(r.logs.size() == 60);
  for (int e = 0; e < 60; e += 7) {
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%04d.jsonl", e);
    const ReplayResult rr = replay_episode(read_episode_log(dir / "logs" / name));
    CHECK_MESSAGE(rr.ok, rr.message);
  }
}

TEST_CASE("test_policy checks shapes and scenario 4 preconditions") {
  Checkpoint k = random_checkpoint(1);
  TestOptions o;
  o.episodes = 2;
  o.scenario4 = true;
  CHECK_THROWS_AS(test_policy(k, CaseSpec::single(PerturbationCase::VEVV), o),
                  std::invalid_argument);
  k.params = PolicyParams::initialized(50, 8, 1);
  o.scenario4 = false;
  CHECK_THROWS_AS(test_policy(k, CaseSpec::single(PerturbationCase::VEVV), o),
                  std::invalid_argument);
  Checkpoint informed = random_checkpoint(3);
  o.scenario4 = true;
  CHECK_THROWS_AS(test_policy(informed, CaseSpec::single(PerturbationCase::VEXV), o),
                  std::invalid_argument);
  o.episodes = 0;
  CHECK_THROWS_AS(test_policy(informed, CaseSpec::single(PerturbationCase::VEVV), o),
                  std::invalid_argument);
}

TEST_CASE("scenario 4 feeds an all-zero uncertainty vector at every step") {
  const Checkpoint k = random_checkpoint(3);
  TestOptions o;
  o.episodes = 5;
  o.scenario4 = true;
  const TestResult r = test_policy(k, CaseSpec::single(PerturbationCase::VEVV), o);
  for (const auto& log : r.logs) {
    CHECK(log.header.scenario == 4);
    for (const auto& obs : log.observations)
      CHECK(obs.uncertainty == std::vector<std::uint8_t>{0, 0, 0, 0});
  }
}

TEST_CASE("run manifests are written atomically and read back") {
  TempDir dir("manifest");
  RunManifest m;
  m.command = "train";
  m.arguments = {"--scenario", "1"};
  m.config_hash = "00ff";
  m.seeds["seed"] = 7;
  m.started_at = utc_timestamp();
  m.artifacts["best"] = "best.ckpt";
  write_manifest(m, dir / "manifest.json");
  CHECK_FALSE(std::filesystem::exists(dir / "manifest.json.tmp"));
  const RunManifest back = read_manifest(dir / "manifest.json");
  CHECK(back.command == "train");
  CHECK(back.arguments == m.arguments);
  CHECK(back.seeds.at("seed") == 7);
  CHECK(back.status == "running");
  CHECK(back.software_version == kSoftwareVersion);
  CHECK(back.started_at.size() == 20);
  CHECK(back.started_at.back() == 'Z');
}
