// Command-line front end: train, test, replay, metrics and teleop.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "uadrive/checkpoint.hpp"
#include "uadrive/experiment.hpp"
#include "uadrive/manifest.hpp"
#include "uadrive/metrics.hpp"
#include "uadrive/teleop.hpp"

namespace {

using namespace uadrive;
namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3, kDivergence = 4 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> g_args;

RunManifest start_manifest(const std::string& command, const fs::path& path) {
  RunManifest m;
  m.command = command;
  m.arguments = g_args;
  m.started_at = utc_timestamp();
  write_manifest(m, path);
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path, const std::string& status,
                     const std::string& message = {}) {
  m.finished_at = utc_timestamp();
  m.status = status;
  m.message = message;
  write_manifest(m, path);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  int scenario = 0;
  std::string config;
  std::uint64_t seed = 1;
  long long steps = 0;
  std::string out;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  ExperimentConfig config;
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) throw ConfigError("config file not found: " + a.config);
    config = load_experiment_config(a.config, a.scenario);
  } else {
    config = experiment_config_from_keys({}, a.scenario);
  }
  config.seed = a.seed;
  if (a.steps > 0) config.total_steps = a.steps;
  config.validate();

  const fs::path out = a.out.empty() ? fs::path("runs") / ("scenario" + std::to_string(a.scenario))
                                     : fs::path(a.out);
  fs::create_directories(out);
  const fs::path manifest_path = out / "manifest.json";
  RunManifest manifest = start_manifest("train", manifest_path);
  manifest.config_hash = hex64(config_hash(config.keys()));
  manifest.seeds["base"] = config.seed;
  manifest.seeds["init"] = derive_seed(config.seed, "init", 0);
  write_manifest(manifest, manifest_path);
  {
    std::ofstream resolved(out / "config.resolved.txt");
    resolved << format_key_values(config.keys());
  }

  int updates = 0;
  TrainResult result;
  try {
    result = train_experiment(config, out, [&](const TrainProgress& p) {
      ++updates;
      if (a.quiet) return;
      if (p.validation) {
        std::printf("validation after episode %d: mean reward %.2f, finish %.2f, collision %.2f\n",
                    p.validation->after_episode, p.validation->mean_reward,
                    p.validation->finish_rate, p.validation->collision_rate);
      }
      if (updates % 25 == 0) {
        std::printf("step %lld  episodes %d  sigma %.3f  value loss %.4f  clip %.3f\n",
                    p.global_step, p.episodes, sigma_schedule(p.global_step, config.hyper),
                    p.update.value_loss, p.update.clip_fraction);
      }
      std::fflush(stdout);
    });
  } catch (const TrainingDiverged& e) {
    finish_manifest(manifest, manifest_path, "failed", e.what());
    throw;
  }

  const Selection sel = select_best(result.candidate_paths, config);
  const fs::path best = out / "best.ckpt";
  save_checkpoint(sel.best, best);
  write_checkpoint_manifest(sel.best, best);

  for (std::size_t i = 0; i < result.candidate_paths.size(); ++i) {
    manifest.artifacts["candidate_" + std::to_string(i)] = result.candidate_paths[i].string();
    if (i < sel.validation_means.size())
      std::printf("candidate %s: validation mean %.3f%s\n",
                  result.candidate_paths[i].filename().string().c_str(),
                  sel.validation_means[i], i == sel.index ? "  <- selected" : "");
  }
  manifest.artifacts["best"] = best.string();
  manifest.artifacts["final"] = result.final_path.string();
  manifest.artifacts["episodes"] = (out / "episodes.csv").string();
  manifest.artifacts["validation"] = (out / "validation.csv").string();
  finish_manifest(manifest, manifest_path, "ok");
  std::printf("trained %lld steps over %zu episodes; best policy: %s\n", result.global_step,
              result.episodes.size(), best.string().c_str());
  return kOk;
}

// ---------------------------------------------------------------- test

struct TestArgs {
  std::string policy;
  std::string case_tag;
  int episodes = 60;
  bool allow_xevv = false;
  bool scenario4 = false;
  std::uint64_t seed = 7;
  std::string out;
};

int run_test(const TestArgs& a) {
  if (a.case_tag == "xevv" && !a.allow_xevv)
    throw UsageError(
        "case xevv is trained on inside the mixed case but is not one of the tested "
        "safety-critical cases (vexv, vexx, xexx, vevv, mpc); pass --allow-xevv to run it anyway");
  if (!fs::exists(a.policy)) throw ConfigError("policy checkpoint not found: " + a.policy);
  Checkpoint policy;
  try {
    policy = load_checkpoint(a.policy);
  } catch (const CheckpointError& e) {
    throw ConfigError(e.what());
  }
  const CaseSpec cases = parse_case_spec(a.case_tag);
  if (a.scenario4 && a.case_tag != "vevv")
    throw UsageError("--scenario4 evaluates with correct perception; use --case vevv");

  const fs::path out = a.out.empty() ? fs::path("tests_out") / a.case_tag : fs::path(a.out);
  fs::create_directories(out);
  const fs::path manifest_path = out / "manifest.json";
  RunManifest manifest = start_manifest("test", manifest_path);
  manifest.config_hash = hex64(policy.config_hash);
  manifest.seeds["test"] = a.seed;

  TestOptions options;
  options.episodes = a.episodes;
  options.seed = a.seed;
  options.scenario4 = a.scenario4;
  options.log_dir = out / "logs";
  TestResult result;
  try {
    result = test_policy(policy, cases, options);
  } catch (const std::invalid_argument& e) {
    finish_manifest(manifest, manifest_path, "failed", e.what());
    throw UsageError(e.what());
  }
  write_metrics_csv(result.metrics, out / "metrics.csv");
  write_boxplot_csv(result.metrics, out / "boxplot.csv");
  const std::string title = "scenario " + std::to_string(a.scenario4 ? 4 : policy.scenario) +
                            " policy, case " + a.case_tag;
  const std::string summary = format_summary(result.metrics, title);
  {
    std::ofstream s(out / "summary.txt");
    s << summary;
  }
  std::cout << summary;
  manifest.artifacts["metrics"] = (out / "metrics.csv").string();
  manifest.artifacts["boxplot"] = (out / "boxplot.csv").string();
  manifest.artifacts["logs"] = (out / "logs").string();
  manifest.artifacts["summary"] = (out / "summary.txt").string();
  finish_manifest(manifest, manifest_path, "ok");
  return kOk;
}

// ---------------------------------------------------------------- replay

int run_replay(const std::string& log_path, const std::string& dump_dir) {
  if (!fs::exists(log_path)) throw ConfigError("episode log not found: " + log_path);
  const EpisodeLog log = read_episode_log(log_path);
  std::optional<fs::path> grids;
  if (!dump_dir.empty()) grids = fs::path(dump_dir);
  const ReplayResult r = replay_episode(log, grids);
  if (!r.ok) {
    std::cerr << "replay diverged at step " << r.first_divergent_step << ": " << r.message << '\n';
    return kDivergence;
  }
  std::cout << r.message << " (" << kind_name(log.kind) << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- metrics

int run_metrics(const std::vector<std::string>& logs, const std::string& out,
                const std::string& trace_out) {
  std::vector<EpisodeLog> loaded;
  for (const auto& p : logs) {
    if (!fs::exists(p)) throw ConfigError("episode log not found: " + p);
    loaded.push_back(read_episode_log(p));
  }
  const BehaviorMetrics m = compute_metrics(loaded);
  if (!out.empty()) write_metrics_csv(m, out);
  if (!trace_out.empty()) {
    if (loaded.size() != 1) throw UsageError("--trace needs exactly one log");
    write_trace_csv(record_human_reference(loaded.front()), trace_out);
  }
  std::cout << format_summary(m, std::to_string(loaded.size()) + " logged episodes");
  return kOk;
}

// ---------------------------------------------------------------- teleop

TeleopServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

struct TeleopArgs {
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string config;
  std::string ui_dir;
  std::string log_dir = "teleop_logs";
  int tick_ms = -1;
  bool lockstep = false;
  std::uint64_t seed = 1;
};

int run_teleop(const TeleopArgs& a) {
  TeleopOptions o;
  o.host = a.host;
  o.port = a.port;
  o.seed = a.seed;
  o.lockstep = a.lockstep;
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) throw ConfigError("config file not found: " + a.config);
    o.world = load_world_config(a.config);
  }
  o.reward.t_max = o.world.t_max;
  o.tick_ms = a.tick_ms >= 0 ? a.tick_ms : static_cast<int>(std::lround(o.world.dt * 1000.0));
  if (!a.ui_dir.empty()) o.ui_dir = fs::path(a.ui_dir);
  o.log_dir = a.log_dir;
  TeleopServer server(o);
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cout << "teleop listening on http://" << a.host << ':' << port << "/ (logs in "
            << a.log_dir << ")" << std::endl;
  server.listen();
  g_server = nullptr;
  for (const auto& p : server.written_logs()) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  g_args.assign(argv + 1, argv + argc);
  CLI::App app{"uadrive: driving under perception uncertainty, PPO experiments"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a policy for scenario 1, 2 or 3");
  train_cmd->add_option("--scenario", train.scenario, "training scenario")
      ->required()
      ->check(CLI::Range(1, 3));
  train_cmd->add_option("--config", train.config, "key = value config file");
  train_cmd->add_option("--seed", train.seed, "base seed");
  train_cmd->add_option("--steps", train.steps, "override total_steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--out", train.out, "output directory");
  train_cmd->add_flag("--quiet", train.quiet, "suppress progress lines");

  TestArgs test;
  auto* test_cmd = app.add_subcommand("test", "run deterministic test episodes");
  test_cmd->add_option("--policy", test.policy, "checkpoint path")->required();
  test_cmd->add_option("--case", test.case_tag, "perturbation case")
      ->required()
      ->transform(CLI::IsMember({"vexv", "vexx", "xexx", "vevv", "mpc", "xevv"}, CLI::ignore_case));
  test_cmd->add_option("--episodes", test.episodes, "number of episodes")
      ->check(CLI::PositiveNumber);
  test_cmd->add_flag("--allow-xevv", test.allow_xevv, "permit the untested case xevv");
  test_cmd->add_flag("--scenario4", test.scenario4,
                     "evaluate a scenario-3 policy with correct perception");
  test_cmd->add_option("--seed", test.seed, "test seed (disjoint streams from training)");
  test_cmd->add_option("--out", test.out, "output directory");

  std::string replay_log, dump_dir;
  auto* replay_cmd = app.add_subcommand("replay", "re-simulate a logged episode bit-exactly");
  replay_cmd->add_option("--log", replay_log, "episode log (.jsonl)")->required();
  replay_cmd->add_option("--dump-grids", dump_dir, "write one PGM per step into this directory");

  std::vector<std::string> metric_logs;
  std::string metrics_out, trace_out;
  auto* metrics_cmd = app.add_subcommand("metrics", "behavior metrics for agent or human logs");
  metrics_cmd->add_option("--log", metric_logs, "episode logs")->required();
  metrics_cmd->add_option("--out", metrics_out, "metrics CSV path");
  metrics_cmd->add_option("--trace", trace_out, "reference trace CSV for a single human log");

  TeleopArgs teleop;
  auto* teleop_cmd = app.add_subcommand("teleop", "serve the human teleoperation session API");
  teleop_cmd->add_option("--port", teleop.port, "TCP port (0 picks a free one)")
      ->check(CLI::Range(0, 65535));
  teleop_cmd->add_option("--host", teleop.host, "bind address");
  teleop_cmd->add_option("--config", teleop.config, "world config file");
  teleop_cmd->add_option("--ui-dir", teleop.ui_dir, "static UI directory");
  teleop_cmd->add_option("--log-dir", teleop.log_dir, "where human episode logs go");
  teleop_cmd->add_option("--tick-ms", teleop.tick_ms, "tick period; defaults to dt")
      ->check(CLI::NonNegativeNumber);
  teleop_cmd->add_flag("--lockstep", teleop.lockstep, "advance one step per command");
  teleop_cmd->add_option("--seed", teleop.seed, "base seed for session worlds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*test_cmd) return run_test(test);
    if (*replay_cmd) return run_replay(replay_log, dump_dir);
    if (*metrics_cmd) return run_metrics(metric_logs, metrics_out, trace_out);
    if (*teleop_cmd) return run_teleop(teleop);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const TrainingDiverged& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
