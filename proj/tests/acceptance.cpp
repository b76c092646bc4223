// Acceptance runner: one PASS/FAIL line per criterion, grouped in three
// suites. Tolerances are fixed here, not taken from the command line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "acceptance_checks.hpp"
#include "uadrive/checkpoint.hpp"
#include "uadrive/experiment.hpp"
#include "uadrive/observation.hpp"
#include "uadrive/reward.hpp"

namespace {

using namespace uadrive;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr double kGradientTolerance = 1e-4;
constexpr double kUniformityAlpha = 0.01;
constexpr int kMpcSegments = 100'000;
constexpr int kPerturbationWorlds = 1000;
constexpr double kExactSuiteSeconds = 1.0;
constexpr double kNumericalSuiteSeconds = 60.0;
constexpr double kExp1VevvFinishMin = 0.8;
constexpr long long kFullBudget = 2'000'000;
constexpr double kPaperExp3MpcFinish = 1.0 / 3.0;

struct Tally {
  int passed = 0;
  int failed = 0;
  int inconclusive = 0;

  void report(bool ok, const std::string& name, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    ok ? ++passed : ++failed;
  }
  // Directional checks at a reduced budget cannot fail outright.
  void directional(bool ok, bool full_budget, const std::string& name, const std::string& detail) {
    if (ok || full_budget) return report(ok, name, detail);
    std::printf("INCONCLUSIVE %s: %s (reduced budget)\n", name.c_str(), detail.c_str());
    std::fflush(stdout);
    ++inconclusive;
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ------------------------------------------------------------------ exact

void exact_suite(Tally& tally) {
  const auto start = Clock::now();

  const int inertia = checks::inertia_grid_mismatches();
  tally.report(inertia == 0, "exact/inertia_grid",
               fmt("%d of 40401 inputs differ from the oracle by more than 1 ulp", inertia));

  RewardParams rp;
  bool terminal_ok = true;
  for (EpisodeKind k : {EpisodeKind::collided, EpisodeKind::stalled, EpisodeKind::timeout}) {
    for (int t : {1, 250, 7500})
      terminal_ok = terminal_ok && compute_reward(t, 0.3, EpisodeStatus{true, k, t}, rp) == -50.0;
  }
  for (int t : {1, 900, 7500})
    terminal_ok = terminal_ok &&
                  compute_reward(t, 0.3, EpisodeStatus{true, EpisodeKind::finished, t}, rp) == 100.0;
  bool weight_ok = compute_reward(0, 0.37, EpisodeStatus{}, rp) == 5.0 * 0.37;
  for (int t = 1; t <= rp.t_max; ++t)
    weight_ok = weight_ok && time_weight(t, rp) < time_weight(t - 1, rp);
  tally.report(terminal_ok, "exact/reward_terminal", "-50 on every failure kind, +100 on finish");
  tally.report(weight_ok, "exact/reward_weight",
               "weight 5.0 at t=0 and strictly decreasing through t_max");

  const bool onehot_ok =
      encode_uncertainty(PerturbationCase::VEXV, true) == std::vector<std::uint8_t>{1, 0, 0, 0} &&
      encode_uncertainty(PerturbationCase::VEVV, true) == std::vector<std::uint8_t>{0, 0, 0, 0};
  const bool sizes_ok = observation_size(scenario_case(1).informed) == 106 &&
                        observation_size(scenario_case(2).informed) == 106 &&
                        observation_size(scenario_case(3).informed) == 110 &&
                        observation_size(scenario_case(4).informed) == 110;
  tally.report(onehot_ok, "exact/uncertainty_onehot", "VEXV -> [1,0,0,0], VEVV -> [0,0,0,0]");
  tally.report(sizes_ok, "exact/observation_length", "106 for scenarios 1-2, 110 for 3-4");

  const int pert = checks::perturbation_mismatches(kPerturbationWorlds, 20240601);
  tally.report(pert == 0, "exact/perturbation_oracle",
               fmt("%d of %d world x case grids differ from the mask oracle", pert,
                   kPerturbationWorlds * 5));

  const double elapsed = seconds_since(start);
  tally.report(elapsed < kExactSuiteSeconds, "exact/runtime",
               fmt("%.3f s (limit %.1f s)", elapsed, kExactSuiteSeconds));
}

// ------------------------------------------------------------------ numerical

void numerical_suite(Tally& tally) {
  const auto start = Clock::now();

  const double grad = checks::ppo_gradient_max_relative_error(20, 77);
  tally.report(grad < kGradientTolerance, "numerical/ppo_gradient",
               fmt("max relative error %.3g over 20 networks (limit %.0e)", grad,
                   kGradientTolerance));

  const auto [p_case, p_duration] = checks::mpc_uniformity_pvalues(kMpcSegments, 99);
  tally.report(p_case > kUniformityAlpha && p_duration > kUniformityAlpha,
               "numerical/mpc_uniformity",
               fmt("chi-square p = %.4f (case), %.4f (duration) over %d segments, need > %.2f",
                   p_case, p_duration, kMpcSegments, kUniformityAlpha));

  tally.report(checks::gae_degenerate_cases_exact(), "numerical/gae_degenerate",
               "lambda=0 equals TD errors and lambda=1 Monte-Carlo advantages bit for bit");

  const double elapsed = seconds_since(start);
  tally.report(elapsed < kNumericalSuiteSeconds, "numerical/runtime",
               fmt("%.2f s (limit %.0f s)", elapsed, kNumericalSuiteSeconds));
}

// ------------------------------------------------------------------ behavioral

struct BehavioralArgs {
  std::string config;
  std::string work_dir = "acceptance_work";
  long long steps = kFullBudget;
  int episodes = 60;
  bool reuse = false;
};

Checkpoint trained_policy(int scenario, const BehavioralArgs& a) {
  ExperimentConfig config = a.config.empty() ? experiment_config_from_keys({}, scenario)
                                             : load_experiment_config(a.config, scenario);
  config.total_steps = a.steps;
  config.validate();
  const fs::path out = fs::path(a.work_dir) / ("scenario" + std::to_string(scenario));
  const fs::path best = out / "best.ckpt";
  if (a.reuse && fs::exists(best)) {
    Checkpoint c = load_checkpoint(best);
    if (c.config_hash == config_hash(config.keys())) {
      std::printf("reusing %s\n", best.string().c_str());
      return c;
    }
  }
  fs::create_directories(out);
  const auto start = Clock::now();
  std::printf("training scenario %d for %lld steps\n", scenario, a.steps);
  std::fflush(stdout);
  const TrainResult r = train_experiment(config, out, {});
  const Selection sel = select_best(r.candidate_paths, config);
  save_checkpoint(sel.best, best);
  std::printf("scenario %d trained in %.0f s over %zu episodes\n", scenario, seconds_since(start),
              r.episodes.size());
  std::fflush(stdout);
  return sel.best;
}

struct CaseResult {
  BehaviorMetrics metrics;
  int episodes = 0;
  int replayed_ok = 0;
};

CaseResult evaluate(const Checkpoint& policy, const std::string& tag, int episodes) {
  TestOptions o;
  o.episodes = episodes;
  const TestResult r = test_policy(policy, parse_case_spec(tag), o);
  CaseResult out{r.metrics, static_cast<int>(r.logs.size()), 0};
  for (const EpisodeLog& log : r.logs) out.replayed_ok += replay_episode(log).ok;
  const BehaviorMetrics& m = r.metrics;
  std::printf(
      "  scenario %d policy on %-4s finish %.3f collision %.3f timeout %.3f stalled %.3f  "
      "ratio median %.3f  front distance median %.2f  brake frequency %.3f\n",
      policy.scenario, tag.c_str(), m.finish_rate, m.collision_rate, m.timeout_rate,
      m.stalled_rate, m.brake_to_throttle_ratio.median, m.front_distance_m.median,
      m.brake_frequency);
  std::fflush(stdout);
  return out;
}

void behavioral_suite(Tally& tally, const BehavioralArgs& a) {
  const bool full = a.steps >= kFullBudget;
  std::map<int, std::map<std::string, CaseResult>> res;
  const std::map<int, std::vector<std::string>> plan = {
      {1, {"vevv", "vexv", "vexx", "mpc"}},
      {2, {"vevv", "vexv", "vexx", "xexx", "mpc"}},
      {3, {"mpc"}},
  };
  for (const auto& [scenario, cases] : plan) {
    const Checkpoint policy = trained_policy(scenario, a);
    for (const std::string& tag : cases) res[scenario][tag] = evaluate(policy, tag, a.episodes);
  }

  const auto& e1 = res[1];
  const auto& e2 = res[2];
  const auto& e3 = res[3];
  const int n = a.episodes;

  tally.directional(e1.at("vevv").metrics.finish_rate >= kExp1VevvFinishMin, full,
                    "behavioral/exp1_vevv_finish",
                    fmt("finish rate %.3f over %d episodes (need >= %.2f)",
                        e1.at("vevv").metrics.finish_rate, n, kExp1VevvFinishMin));
  for (const char* tag : {"vexv", "vexx"}) {
    const double c = e1.at(tag).metrics.collision_rate;
    tally.directional(c == 1.0, full, std::string("behavioral/exp1_") + tag + "_collision",
                      fmt("collision rate %.3f over %d episodes (need 1.0)", c, n));
  }

  const double e2_vevv_ratio = e2.at("vevv").metrics.brake_to_throttle_ratio.median;
  for (const char* tag : {"vexv", "vexx", "xexx", "mpc"}) {
    const double r = e2.at(tag).metrics.brake_to_throttle_ratio.median;
    tally.directional(r > e2_vevv_ratio, full, std::string("behavioral/exp2_ratio_") + tag,
                      fmt("median brake/throttle ratio %.3f vs %.3f on vevv", r, e2_vevv_ratio));
  }
  {
    const double d2 = e2.at("vevv").metrics.front_distance_m.median;
    const double d1 = e1.at("vevv").metrics.front_distance_m.median;
    tally.directional(d2 > d1, full, "behavioral/exp2_vs_exp1_distance",
                      fmt("vevv median front distance %.3f m (exp2) vs %.3f m (exp1)", d2, d1));
  }

  {
    const double d3 = e3.at("mpc").metrics.front_distance_m.median;
    const double d2 = e2.at("mpc").metrics.front_distance_m.median;
    tally.directional(d3 < d2, full, "behavioral/exp3_vs_exp2_distance",
                      fmt("mpc median front distance %.3f m (exp3) vs %.3f m (exp2)", d3, d2));
    const double b3 = e3.at("mpc").metrics.brake_frequency;
    const double b2 = e2.at("mpc").metrics.brake_frequency;
    tally.directional(b3 < b2, full, "behavioral/exp3_vs_exp2_braking",
                      fmt("mpc brake frequency %.4f (exp3) vs %.4f (exp2)", b3, b2));
    const double f3 = e3.at("mpc").metrics.finish_rate;
    const double f1 = e1.at("mpc").metrics.finish_rate;
    tally.directional(f3 > f1, full, "behavioral/exp3_vs_exp1_mpc_finish",
                      fmt("mpc finish rate %.3f (exp3) vs %.3f (exp1); reference point %.2f%%", f3,
                          f1, 100.0 * kPaperExp3MpcFinish));
  }

  int total = 0;
  int ok = 0;
  for (const auto& [scenario, cases] : res)
    for (const auto& [tag, r] : cases) {
      total += r.episodes;
      ok += r.replayed_ok;
    }
  tally.report(ok == total, "behavioral/replay_determinism",
               fmt("%d of %d test episodes replay bit-exactly", ok, total));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uadrive acceptance checks"};
  std::string suite = "all";
  BehavioralArgs behavioral;
  app.add_option("--suite", suite, "exact, numerical, behavioral or all")
      ->check(CLI::IsMember({"exact", "numerical", "behavioral", "all"}));
  app.add_option("--config", behavioral.config, "training config for the behavioral suite");
  app.add_option("--work-dir", behavioral.work_dir, "where behavioral runs are written");
  app.add_option("--steps", behavioral.steps,
                 "training budget per scenario; below 2,000,000 failures are inconclusive")
      ->check(CLI::PositiveNumber);
  app.add_option("--episodes", behavioral.episodes, "test episodes per case")
      ->check(CLI::PositiveNumber);
  app.add_flag("--reuse", behavioral.reuse, "reuse best.ckpt from an identical earlier run");
  CLI11_PARSE(app, argc, argv);

  Tally tally;
  try {
    if (suite == "exact" || suite == "all") exact_suite(tally);
    if (suite == "numerical" || suite == "all") numerical_suite(tally);
    if (suite == "behavioral" || suite == "all") behavioral_suite(tally, behavioral);
  } catch (const std::exception& e) {
    std::printf("FAIL %s suite aborted: %s\n", suite.c_str(), e.what());
    return 1;
  }
  std::printf("%d passed, %d failed, %d inconclusive\n", tally.passed, tally.failed,
              tally.inconclusive);
  if (tally.failed > 0) return 1;
  return tally.inconclusive > 0 ? 2 : 0;
}
