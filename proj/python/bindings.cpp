#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cmath>

#include "uadrive/checkpoint.hpp"
#include "uadrive/experiment.hpp"
#include "uadrive/metrics.hpp"

namespace py = pybind11;
using namespace uadrive;

namespace {

py::dict observation_dict(const Observation& o) {
  py::dict d;
  d["vision"] = py::array_t<std::uint8_t>({25, 4}, o.vision.data());
  d["non_visual"] = py::array_t<double>(o.non_visual.size(), o.non_visual.data());
  d["uncertainty"] = py::array_t<std::uint8_t>(o.uncertainty.size(), o.uncertainty.data());
  return d;
}

py::object gap_value(double gap) {
  return std::isfinite(gap) ? py::object(py::float_(gap)) : py::object(py::none());
}

py::dict distribution_dict(const Distribution& d) {
  py::dict out;
  out["min"] = d.min;
  out["q1"] = d.q1;
  out["median"] = d.median;
  out["q3"] = d.q3;
  out["max"] = d.max;
  out["mean"] = d.mean;
  out["count"] = d.values.size();
  return out;
}

py::dict metrics_dict(const BehaviorMetrics& m) {
  py::dict d;
  d["episodes"] = m.episodes;
  d["finish_rate"] = m.finish_rate;
  d["collision_rate"] = m.collision_rate;
  d["timeout_rate"] = m.timeout_rate;
  d["stalled_rate"] = m.stalled_rate;
  d["aborted_rate"] = m.aborted_rate;
  d["brake_frequency"] = m.brake_frequency;
  d["traveled_distance_m"] = distribution_dict(m.traveled_distance_m);
  d["episode_steps"] = distribution_dict(m.episode_steps);
  d["brake_to_throttle_ratio"] = distribution_dict(m.brake_to_throttle_ratio);
  d["front_distance_m"] = distribution_dict(m.front_distance_m);
  d["mean_velocity"] = distribution_dict(m.mean_velocity);
  py::list kinds;
  for (const EpisodeMetrics& e : m.per_episode) kinds.append(std::string(kind_name(e.kind)));
  d["kinds"] = kinds;
  return d;
}

ExperimentConfig make_config(int scenario, const std::optional<std::filesystem::path>& config,
                             std::optional<long long> steps, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = config ? load_experiment_config(*config, scenario)
                              : experiment_config_from_keys({}, scenario);
  if (steps) c.total_steps = *steps;
  if (seed) c.seed = *seed;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "uadrive C++ core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TrainingDiverged>(m, "TrainingDiverged", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);

  py::enum_<PerturbationCase>(m, "PerturbationCase")
      .value("VEXV", PerturbationCase::VEXV)
      .value("XEVV", PerturbationCase::XEVV)
      .value("VEXX", PerturbationCase::VEXX)
      .value("XEXX", PerturbationCase::XEXX)
      .value("VEVV", PerturbationCase::VEVV);

  py::enum_<EpisodeKind>(m, "EpisodeKind")
      .value("running", EpisodeKind::running)
      .value("finished", EpisodeKind::finished)
      .value("collided", EpisodeKind::collided)
      .value("timeout", EpisodeKind::timeout)
      .value("stalled", EpisodeKind::stalled)
      .value("aborted", EpisodeKind::aborted);

  m.def("apply_inertia", &apply_inertia, py::arg("a_tilde"), py::arg("a_prev"),
        "Inertia filter applied to every ego command; raises ValueError outside [-1, 1].");

  m.def(
      "compute_reward",
      [](int t, double v_mom, EpisodeKind kind) {
        EpisodeStatus s;
        s.kind = kind;
        s.terminal = kind != EpisodeKind::running;
        s.t_terminal = s.terminal ? t : -1;
        return compute_reward(t, v_mom, s, RewardParams{});
      },
      py::arg("t"), py::arg("v_mom"), py::arg("kind") = EpisodeKind::running,
      "Reward with default parameters.");
  m.def("observation_size", &observation_size, py::arg("informed"));
  m.def(
      "encode_uncertainty",
      [](PerturbationCase c, bool informed) { return encode_uncertainty(c, informed); },
      py::arg("case"), py::arg("informed") = true);
  m.def(
      "sample_mpc_schedule",
      [](std::uint64_t seed, int horizon) {
        py::list out;
        for (const MpcSegment& s : sample_mpc_schedule(seed, horizon).segments)
          out.append(py::make_tuple(std::string(case_tag(s.perturbation)), s.duration));
        return out;
      },
      py::arg("seed"), py::arg("horizon"),
      "Mixed-case schedule as (case tag, duration) pairs covering `horizon` steps.");
  m.def(
      "quantile_type7",
      [](std::vector<double> values, double p) {
        std::sort(values.begin(), values.end());
        return quantile_type7(values, p);
      },
      py::arg("values"), py::arg("p"));

  py::class_<DrivingEnv>(m, "DrivingEnv")
      .def(py::init([](const std::string& case_tag, bool informed,
                       const std::optional<std::filesystem::path>& world_config) {
             const WorldConfig w = world_config ? load_world_config(*world_config) : WorldConfig{};
             RewardParams r;
             r.t_max = w.t_max;
             return DrivingEnv(w, r, informed, parse_case_spec(case_tag));
           }),
           py::arg("case") = "vevv", py::arg("informed") = false,
           py::arg("world_config") = py::none())
      .def(
          "reset",
          [](DrivingEnv& env, std::uint64_t world_seed, std::uint64_t schedule_seed) {
            return observation_dict(env.reset(world_seed, schedule_seed));
          },
          py::arg("world_seed"), py::arg("schedule_seed") = 0)
      .def(
          "step",
          [](DrivingEnv& env, double a_tilde) {
            const EnvStep s = env.step(a_tilde);
            py::dict d;
            d["observation"] = observation_dict(s.observation);
            d["a_tilde"] = s.a_tilde;
            d["a"] = s.a;
            d["reward"] = s.reward;
            d["done"] = s.status.terminal;
            d["kind"] = s.status.kind;
            d["case"] = std::string(case_tag(s.perturbation));
            d["front_gap"] = gap_value(s.front_gap);
            return d;
          },
          py::arg("a_tilde"))
      .def_property_readonly("done", &DrivingEnv::done)
      .def_property_readonly("t", [](const DrivingEnv& e) { return e.world().t; })
      .def_property_readonly("ego_position",
                             [](const DrivingEnv& e) { return e.world().ego().position_m; })
      .def_property_readonly("ego_velocity",
                             [](const DrivingEnv& e) { return e.world().ego().velocity_mps; })
      .def_property_readonly("observation",
                             [](const DrivingEnv& e) { return observation_dict(e.observation()); });

  m.def(
      "train",
      [](int scenario, const std::filesystem::path& out,
         const std::optional<std::filesystem::path>& config, std::optional<long long> steps,
         std::optional<std::uint64_t> seed) {
        const ExperimentConfig c = make_config(scenario, config, steps, seed);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_experiment(c, out, {});
        }
        py::dict d;
        d["global_step"] = r.global_step;
        d["episodes"] = r.episodes.size();
        d["candidates"] = r.candidate_paths;
        d["final"] = r.final_path;
        py::list returns;
        for (const EpisodeSummary& e : r.episodes) returns.append(e.cumulative_reward);
        d["episode_returns"] = returns;
        return d;
      },
      py::arg("scenario"), py::arg("out"), py::arg("config") = py::none(),
      py::arg("steps") = py::none(), py::arg("seed") = py::none(),
      "Runs training; writes candidates, final.ckpt and CSV logs into `out`.");

  m.def(
      "select_best",
      [](const std::vector<std::filesystem::path>& candidates, const std::filesystem::path& dest,
         int scenario, const std::optional<std::filesystem::path>& config) {
        const ExperimentConfig c = make_config(scenario, config, std::nullopt, std::nullopt);
        Selection s;
        {
          py::gil_scoped_release release;
          s = select_best(candidates, c);
        }
        save_checkpoint(s.best, dest);
        return py::make_tuple(s.index, s.validation_means);
      },
      py::arg("candidates"), py::arg("dest"), py::arg("scenario"), py::arg("config") = py::none(),
      "Validates candidates greedily and saves the best to `dest`; returns (index, means).");

  m.def(
      "test_policy",
      [](const std::filesystem::path& policy, const std::string& case_tag, int episodes,
         std::uint64_t seed, bool scenario4, const std::optional<std::filesystem::path>& log_dir) {
        const Checkpoint ckpt = load_checkpoint(policy);
        TestOptions o;
        o.episodes = episodes;
        o.seed = seed;
        o.scenario4 = scenario4;
        o.log_dir = log_dir;
        TestResult r;
        {
          py::gil_scoped_release release;
          r = test_policy(ckpt, parse_case_spec(case_tag), o);
        }
        return metrics_dict(r.metrics);
      },
      py::arg("policy"), py::arg("case"), py::arg("episodes") = 60, py::arg("seed") = 7,
      py::arg("scenario4") = false, py::arg("log_dir") = py::none());

  m.def(
      "replay",
      [](const std::filesystem::path& log) {
        const ReplayResult r = replay_episode(read_episode_log(log));
        py::dict d;
        d["ok"] = r.ok;
        d["first_divergent_step"] = r.first_divergent_step;
        d["message"] = r.message;
        d["steps_replayed"] = r.steps_replayed;
        return d;
      },
      py::arg("log"), "Re-simulates a logged episode and compares it bit for bit.");

  m.def(
      "load_episode_log",
      [](const std::filesystem::path& path) {
        const EpisodeLog log = read_episode_log(path);
        py::dict d;
        d["tag"] = log.header.tag;
        d["kind"] = log.kind;
        d["t_terminal"] = log.t_terminal;
        std::vector<double> a_tilde, a, reward, position, velocity;
        py::list gaps;
        for (const StepRecord& s : log.steps) {
          a_tilde.push_back(s.a_tilde);
          a.push_back(s.a);
          reward.push_back(s.reward);
          position.push_back(s.ego_position);
          velocity.push_back(s.ego_velocity);
          gaps.append(gap_value(s.front_gap));
        }
        d["a_tilde"] = py::array_t<double>(a_tilde.size(), a_tilde.data());
        d["a"] = py::array_t<double>(a.size(), a.data());
        d["reward"] = py::array_t<double>(reward.size(), reward.data());
        d["ego_position"] = py::array_t<double>(position.size(), position.data());
        d["ego_velocity"] = py::array_t<double>(velocity.size(), velocity.data());
        d["front_gap"] = gaps;
        return d;
      },
      py::arg("path"));

  m.def(
      "metrics_from_logs",
      [](const std::vector<std::filesystem::path>& paths) {
        std::vector<EpisodeLog> logs;
        for (const auto& p : paths) logs.push_back(read_episode_log(p));
        return metrics_dict(compute_metrics(logs));
      },
      py::arg("paths"));
}
