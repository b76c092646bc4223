#include "uadrive/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace uadrive {

namespace {

void take_number(KeyValues& kv, const char* key, auto& field) {
  auto it = kv.find(key);
  if (it == kv.end()) return;
  try {
    std::size_t used = 0;
    using T = std::remove_reference_t<decltype(field)>;
    if constexpr (std::is_floating_point_v<T>) {
      field = std::stod(it->second, &used);
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!it->second.empty() && it->second.front() == '-') throw std::invalid_argument("sign");
      field = static_cast<T>(std::stoull(it->second, &used));
    } else {
      field = static_cast<T>(std::stoll(it->second, &used));
    }
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw ConfigError(std::string("key '") + key + "': invalid number '" + it->second + "'");
  }
  kv.erase(it);
}

std::filesystem::path candidate_path(const std::filesystem::path& dir, int episode) {
  char name[64];
  std::snprintf(name, sizeof(name), "candidate_ep%06d.ckpt", episode);
  return dir / name;
}

struct Candidate {
  double episode_return = 0.0;
  int episode = 0;
  long long global_step = 0;
  PolicyParams params;
};

// Keeps the k best episode returns seen so far. A newcomer must be strictly
// better than the current minimum; among equal minima the latest is evicted,
// which matches top_k_indices on the full return sequence.
class CandidatePool {
 public:
  explicit CandidatePool(std::size_t k) : k_(k) {}

  void offer(double episode_return, int episode, long long step, const PolicyParams& params) {
    if (k_ == 0) return;
    if (pool_.size() < k_) {
      pool_.push_back({episode_return, episode, step, params});
      return;
    }
    auto worst = pool_.begin();
    for (auto it = pool_.begin(); it != pool_.end(); ++it) {
      if (it->episode_return < worst->episode_return ||
          (it->episode_return == worst->episode_return && it->episode > worst->episode))
        worst = it;
    }
    if (episode_return > worst->episode_return) *worst = {episode_return, episode, step, params};
  }

  std::vector<Candidate> sorted_by_episode() const {
    std::vector<Candidate> out = pool_;
    std::sort(out.begin(), out.end(),
              [](const Candidate& a, const Candidate& b) { return a.episode < b.episode; });
    return out;
  }

 private:
  std::size_t k_;
  std::vector<Candidate> pool_;
};

Checkpoint make_checkpoint(const ExperimentConfig& config, const PolicyParams& params,
                           long long step, int episode, double episode_return) {
  Checkpoint c;
  c.scenario = config.scenario;
  c.informed = config.informed();
  c.params = params;
  c.hyper = config.hyper;
  c.world = config.world;
  c.reward = config.reward;
  c.global_step = step;
  c.episode = episode;
  c.episode_return = episode_return;
  c.seed = config.seed;
  c.config_hash = config_hash(config.keys());
  return c;
}

void save_with_manifest(const Checkpoint& c, const std::filesystem::path& path) {
  save_checkpoint(c, path);
  write_checkpoint_manifest(c, path);
}

}  // namespace

CaseSpec ExperimentConfig::training_case() const {
  return scenario == 1 ? CaseSpec::single(PerturbationCase::VEVV) : CaseSpec::mpc();
}

bool ExperimentConfig::informed() const { return scenario_case(scenario).informed; }

void ExperimentConfig::validate() const {
  if (scenario < 1 || scenario > 3)
    throw ConfigError("training scenario must be 1, 2 or 3 (scenario 4 is test-only)");
  if (total_steps <= 0) throw ConfigError("total_steps must be > 0");
  if (validate_every_n_episodes <= 0) throw ConfigError("validate_every_n_episodes must be > 0");
  if (validation_episodes <= 0) throw ConfigError("validation_episodes must be > 0");
  if (test_episodes <= 0) throw ConfigError("test_episodes must be > 0");
  if (candidates <= 0) throw ConfigError("candidates must be > 0");
  if (validation_candidates < 0) throw ConfigError("validation_candidates must be >= 0");
  if (!(initial_mu > -1.0 && initial_mu < 1.0))
    throw ConfigError("initial_mu must lie in (-1, 1)");
  world.validate();
  reward.validate();
  hyper.validate();
  if (reward.t_max != world.t_max) throw ConfigError("reward.t_max must equal t_max");
}

KeyValues ExperimentConfig::keys() const {
  KeyValues kv = world_config_keys(world);
  for (auto& [k, v] : ppo_keys(hyper)) kv[k] = v;
  kv["reward.beta"] = format_double(reward.beta);
  kv["reward.beta_tilde"] = format_double(reward.beta_tilde);
  kv["reward.alpha"] = format_double(reward.alpha);
  kv["reward.alpha_tilde"] = format_double(reward.alpha_tilde);
  kv["reward.t_max"] = std::to_string(reward.t_max);
  kv["scenario"] = std::to_string(scenario);
  kv["total_steps"] = std::to_string(total_steps);
  kv["validate_every_n_episodes"] = std::to_string(validate_every_n_episodes);
  kv["validation_episodes"] = std::to_string(validation_episodes);
  kv["test_episodes"] = std::to_string(test_episodes);
  kv["candidates"] = std::to_string(candidates);
  kv["validation_candidates"] = std::to_string(validation_candidates);
  kv["seed"] = std::to_string(seed);
  kv["initial_mu"] = format_double(initial_mu);
  return kv;
}

ExperimentConfig experiment_config_from_keys(KeyValues kv, int scenario) {
  ExperimentConfig c;
  c.scenario = scenario;
  // The world's own "seed" key is unused by the experiment (episode seeds
  // are derived); the experiment seed takes that name.
  take_number(kv, "seed", c.seed);
  take_world_keys(kv, c.world);
  take_ppo_keys(kv, c.hyper);
  take_number(kv, "reward.beta", c.reward.beta);
  take_number(kv, "reward.beta_tilde", c.reward.beta_tilde);
  take_number(kv, "reward.alpha", c.reward.alpha);
  take_number(kv, "reward.alpha_tilde", c.reward.alpha_tilde);
  c.reward.t_max = c.world.t_max;
  take_number(kv, "reward.t_max", c.reward.t_max);
  take_number(kv, "total_steps", c.total_steps);
  take_number(kv, "validate_every_n_episodes", c.validate_every_n_episodes);
  take_number(kv, "validation_episodes", c.validation_episodes);
  take_number(kv, "test_episodes", c.test_episodes);
  take_number(kv, "candidates", c.candidates);
  take_number(kv, "validation_candidates", c.validation_candidates);
  take_number(kv, "initial_mu", c.initial_mu);
  if (auto it = kv.find("scenario"); it != kv.end()) {
    if (it->second != std::to_string(scenario))
      throw ConfigError("config pins scenario " + it->second + " but scenario " +
                        std::to_string(scenario) + " was requested");
    kv.erase(it);
  }
  if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, int scenario) {
  return experiment_config_from_keys(read_key_values(path), scenario);
}

std::uint64_t train_world_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "train-world", static_cast<std::uint64_t>(episode));
}
std::uint64_t train_schedule_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "train-schedule", static_cast<std::uint64_t>(episode));
}
std::uint64_t validation_world_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "validation-world", static_cast<std::uint64_t>(episode));
}
std::uint64_t validation_schedule_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "validation-schedule", static_cast<std::uint64_t>(episode));
}
std::uint64_t test_world_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "test-world", static_cast<std::uint64_t>(episode));
}
std::uint64_t test_schedule_seed(std::uint64_t base, int episode) {
  return derive_seed(base, "test-schedule", static_cast<std::uint64_t>(episode));
}

std::vector<std::size_t> top_k_indices(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(std::min(k, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

std::size_t select_best_index(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("select_best_index: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

EpisodeLog run_episode(DrivingEnv& env, const PolicyParams& params, int scenario,
                       int episode_index, std::uint64_t world_seed,
                       std::uint64_t schedule_seed) {
  env.reset(world_seed, schedule_seed);
  EpisodeLog log;
  log.header = make_header(env, scenario, episode_index, "agent");
  log.observations.push_back(env.observation());
  while (!env.done()) {
    const double a_tilde = deterministic_action(policy_forward(env.observation(), params).mu);
    const EnvStep step = env.step(a_tilde);
    record_step(log, step, env.world());
  }
  finish_log(log, env.world().status, env.world().t);
  return log;
}

PolicyEvaluation evaluate_policy(const PolicyParams& params, const ExperimentConfig& config,
                                 int episodes) {
  DrivingEnv env(config.world, config.reward, config.informed(), config.training_case());
  PolicyEvaluation out;
  for (int e = 0; e < episodes; ++e) {
    env.reset(validation_world_seed(config.seed, e), validation_schedule_seed(config.seed, e));
    double total = 0.0;
    while (!env.done()) {
      const double a_tilde = deterministic_action(policy_forward(env.observation(), params).mu);
      total += env.step(a_tilde).reward;
    }
    out.mean_reward += total;
    out.finish_rate += env.world().status == EpisodeKind::finished ? 1.0 : 0.0;
    out.collision_rate += env.world().status == EpisodeKind::collided ? 1.0 : 0.0;
  }
  out.mean_reward /= episodes;
  out.finish_rate /= episodes;
  out.collision_rate /= episodes;
  return out;
}

TrainResult train_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                             const std::function<void(const TrainProgress&)>& progress) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const PpoHyperParams& h = config.hyper;

  std::ofstream episodes_csv(out_dir / "episodes.csv");
  std::ofstream validation_csv(out_dir / "validation.csv");
  if (!episodes_csv || !validation_csv)
    throw std::runtime_error("cannot create training logs in " + out_dir.string());
  episodes_csv << "episode,global_step,steps,kind,cumulative_reward,sigma\n";
  validation_csv << "after_episode,global_step,mean_reward,finish_rate,collision_rate\n";

  DrivingEnv env(config.world, config.reward, config.informed(), config.training_case());
  PolicyParams params = PolicyParams::initialized(observation_size(config.informed()),
                                                  h.hidden_size, derive_seed(config.seed, "init", 0),
                                                  config.initial_mu);
  Optimizer optimizer(h.optimizer, h.learning_rate, params.flat.size());
  Rng rng(derive_seed(config.seed, "policy-noise", 0));
  CandidatePool pool(static_cast<std::size_t>(config.candidates));
  CandidatePool validated_pool(static_cast<std::size_t>(config.validation_candidates));

  TrainResult result;
  long long step = 0;
  int episode = 0;
  int episode_steps = 0;
  double episode_return = 0.0;
  env.reset(train_world_seed(config.seed, 0), train_schedule_seed(config.seed, 0));

  auto save_candidates = [&] {
    result.candidate_paths.clear();
    // A snapshot can sit in both pools; the parameters are identical then.
    std::map<int, Candidate> merged;
    for (const Candidate& c : validated_pool.sorted_by_episode()) merged.emplace(c.episode, c);
    for (const Candidate& c : pool.sorted_by_episode()) merged.insert_or_assign(c.episode, c);
    for (const auto& [index, c] : merged) {
      const auto path = candidate_path(out_dir, c.episode);
      save_with_manifest(make_checkpoint(config, c.params, c.global_step, c.episode,
                                         c.episode_return),
                         path);
      result.candidate_paths.push_back(path);
    }
  };

  try {
    std::vector<Transition> rollout;
    rollout.reserve(static_cast<std::size_t>(h.rollout_length));
    while (step < config.total_steps) {
      rollout.clear();
      std::optional<ValidationSummary> validated;
      while (static_cast<int>(rollout.size()) < h.rollout_length && step < config.total_steps) {
        Transition tr;
        tr.features = observation_features(env.observation());
        const PolicyOutput out = policy_forward(tr.features, params);
        const double sigma = sigma_schedule(step, h);
        const ActionSample sample = sample_action(out.mu, sigma, rng);
        const EnvStep st = env.step(sample.a_tilde);
        ++step;
        ++episode_steps;
        episode_return += st.reward;
        tr.action_raw = sample.raw;
        tr.action = sample.a_tilde;
        tr.logp = sample.logp;
        tr.sigma = sigma;
        tr.reward = st.reward;
        tr.value = out.value;
        tr.done = st.status.terminal;
        rollout.push_back(std::move(tr));
        if (!st.status.terminal) continue;

        EpisodeSummary summary{episode, step, episode_steps, episode_return, st.status.kind, sigma};
        episodes_csv << summary.episode << ',' << summary.global_step << ',' << summary.steps
                     << ',' << kind_name(summary.kind) << ',' << format_double(episode_return)
                     << ',' << format_double(sigma) << '\n';
        result.episodes.push_back(summary);
        // The snapshot is the parameter set that drove this episode's end.
        pool.offer(episode_return, episode, step, params);
        ++episode;
        if (episode % config.validate_every_n_episodes == 0) {
          const PolicyEvaluation v = evaluate_policy(params, config, config.validation_episodes);
          ValidationSummary vs{episode, step, v.mean_reward, v.finish_rate, v.collision_rate};
          validation_csv << vs.after_episode << ',' << vs.global_step << ','
                         << format_double(vs.mean_reward) << ',' << format_double(vs.finish_rate)
                         << ',' << format_double(vs.collision_rate) << '\n';
          validation_csv.flush();
          result.validations.push_back(vs);
          validated = vs;
          if (config.validation_candidates > 0)
            validated_pool.offer(v.mean_reward, episode - 1, step, params);
        }
        episode_steps = 0;
        episode_return = 0.0;
        env.reset(train_world_seed(config.seed, episode),
                  train_schedule_seed(config.seed, episode));
      }
      episodes_csv.flush();
      const double bootstrap =
          rollout.back().done ? 0.0 : policy_forward(env.observation(), params).value;
      compute_advantages(rollout, bootstrap, h);
      TrainProgress p;
      p.update = ppo_update(rollout, params, h, optimizer, rng);
      p.global_step = step;
      p.episodes = episode;
      p.validation = validated;
      if (progress) progress(p);
    }
  } catch (const TrainingDiverged& e) {
    episodes_csv.flush();
    save_candidates();
    std::ofstream note(out_dir / "diverged.txt");
    note << "global_step = " << step << "\nepisode = " << episode << "\nreason = " << e.what()
         << '\n';
    throw;
  }

  save_candidates();
  result.final_path = out_dir / "final.ckpt";
  save_with_manifest(make_checkpoint(config, params, step, episode - 1,
                                     result.episodes.empty() ? 0.0
                                                             : result.episodes.back().cumulative_reward),
                     result.final_path);
  result.global_step = step;
  return result;
}

Selection select_best(std::span<const std::filesystem::path> candidates,
                      const ExperimentConfig& config) {
  if (candidates.empty()) throw CheckpointError("select_best: no candidate checkpoints");
  std::vector<Checkpoint> loaded;
  for (const auto& path : candidates) {
    if (!std::filesystem::exists(path))
      throw CheckpointError("select_best: missing checkpoint " + path.string());
    loaded.push_back(load_checkpoint(path));
  }
  Selection s;
  if (loaded.size() == 1) {
    s.index = 0;
    s.best = std::move(loaded.front());
    return s;
  }
  for (const Checkpoint& c : loaded)
    s.validation_means.push_back(
        evaluate_policy(c.params, config, config.validation_episodes).mean_reward);
  s.index = select_best_index(s.validation_means);
  s.best = std::move(loaded[s.index]);
  return s;
}

TestResult test_policy(const Checkpoint& policy, CaseSpec cases, const TestOptions& options) {
  if (options.episodes <= 0) throw std::invalid_argument("test_policy: episodes must be > 0");
  const bool informed = policy.params.input_size == observation_size(true);
  if (!informed && policy.params.input_size != observation_size(false))
    throw std::invalid_argument("test_policy: network input size " +
                                std::to_string(policy.params.input_size) +
                                " matches no observation layout");
  if (informed != policy.informed)
    throw std::invalid_argument("test_policy: checkpoint informedness disagrees with its network");
  int scenario = policy.scenario;
  if (options.scenario4) {
    if (!informed)
      throw std::invalid_argument("test_policy: scenario 4 needs a policy with the uncertainty input");
    if (cases != CaseSpec::single(PerturbationCase::VEVV))
      throw std::invalid_argument("test_policy: scenario 4 runs with correct perception (case vevv)");
    scenario = 4;
  }
  if (options.log_dir) std::filesystem::create_directories(*options.log_dir);

  DrivingEnv env(policy.world, policy.reward, informed, cases);
  TestResult result;
  std::vector<EpisodeMetrics> metrics;
  for (int e = 0; e < options.episodes; ++e) {
    EpisodeLog log = run_episode(env, policy.params, scenario, e,
                                 test_world_seed(options.seed, e),
                                 test_schedule_seed(options.seed, e));
    if (options.log_dir) {
      char name[48];
      std::snprintf(name, sizeof(name), "episode_%04d.jsonl", e);
      write_episode_log(log, *options.log_dir / name);
    }
    metrics.push_back(episode_metrics(log));
    result.logs.push_back(std::move(log));
  }
  result.metrics = aggregate_metrics(std::move(metrics));
  return result;
}

}  // namespace uadrive
