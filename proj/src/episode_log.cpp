#include "uadrive/episode_log.hpp"

#include <bit>
#include <cstdio>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace uadrive {

namespace {

using nlohmann::json;

json gap_to_json(double gap) {
  if (std::isinf(gap)) return nullptr;
  return gap;
}

double gap_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

json header_to_json(const EpisodeHeader& h) {
  json segments = json::array();
  for (const auto& s : h.schedule.segments)
    segments.push_back({std::string(case_tag(s.perturbation)), s.duration});
  json world = json::object();
  for (const auto& [k, v] : h.world_config) world[k] = v;
  return {{"type", "header"},
          {"version", h.version},
          {"tag", h.tag},
          {"scenario", h.scenario},
          {"informed", h.informed},
          {"case", h.cases.tag()},
          {"episode", h.episode_index},
          {"world_seed", h.world_seed},
          {"schedule_seed", h.schedule_seed},
          {"schedule", segments},
          {"world_config", world},
          {"reward",
           {{"beta", h.reward.beta},
            {"beta_tilde", h.reward.beta_tilde},
            {"alpha", h.reward.alpha},
            {"alpha_tilde", h.reward.alpha_tilde},
            {"t_max", h.reward.t_max}}}};
}

EpisodeHeader header_from_json(const json& j) {
  EpisodeHeader h;
  h.version = j.at("version").get<int>();
  if (h.version != kEpisodeLogVersion)
    throw LogFormatError("unsupported episode log version " + std::to_string(h.version));
  h.tag = j.at("tag").get<std::string>();
  h.scenario = j.at("scenario").get<int>();
  h.informed = j.at("informed").get<bool>();
  h.cases = parse_case_spec(j.at("case").get<std::string>());
  h.episode_index = j.at("episode").get<int>();
  h.world_seed = j.at("world_seed").get<std::uint64_t>();
  h.schedule_seed = j.at("schedule_seed").get<std::uint64_t>();
  h.schedule.seed = h.schedule_seed;
  for (const auto& seg : j.at("schedule")) {
    h.schedule.segments.push_back(
        {parse_case(seg.at(0).get<std::string>()), seg.at(1).get<int>()});
  }
  for (const auto& [k, v] : j.at("world_config").items())
    h.world_config[k] = v.get<std::string>();
  const json& r = j.at("reward");
  h.reward.beta = r.at("beta").get<double>();
  h.reward.beta_tilde = r.at("beta_tilde").get<double>();
  h.reward.alpha = r.at("alpha").get<double>();
  h.reward.alpha_tilde = r.at("alpha_tilde").get<double>();
  h.reward.t_max = r.at("t_max").get<int>();
  return h;
}

void put_le64(std::vector<std::uint8_t>& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_le64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<double> EpisodeLog::rewards() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.reward);
  return out;
}

EpisodeHeader make_header(const DrivingEnv& env, int scenario, int episode_index,
                          std::string tag) {
  EpisodeHeader h;
  h.tag = std::move(tag);
  h.scenario = scenario;
  h.informed = env.informed();
  h.cases = env.cases();
  h.episode_index = episode_index;
  h.world_seed = env.world_seed();
  h.schedule_seed = env.schedule_seed();
  h.schedule = env.schedule();
  h.world_config = world_config_keys(env.world_config());
  h.reward = env.reward_params();
  return h;
}

void record_step(EpisodeLog& log, const EnvStep& step, const WorldState& world) {
  StepRecord rec;
  rec.t = world.t;
  rec.ego_position = world.ego().position_m;
  rec.ego_velocity = world.ego().velocity_mps;
  rec.perturbation = step.perturbation;
  rec.a_tilde = step.a_tilde;
  rec.a = step.a;
  rec.reward = step.reward;
  rec.front_gap = step.front_gap;
  log.observations.push_back(step.observation);
  rec.obs_index = log.observations.size() - 1;
  log.steps.push_back(rec);
}

void finish_log(EpisodeLog& log, EpisodeKind kind, int t_terminal) {
  log.kind = kind;
  log.t_terminal = t_terminal;
}

std::vector<std::uint8_t> encode_observation(const Observation& obs) {
  std::vector<std::uint8_t> out(obs.vision.begin(), obs.vision.end());
  out.reserve(kObservationRecordSize);
  for (double v : obs.non_visual) put_le64(out, v);
  if (obs.uncertainty.empty()) {
    out.push_back(0xFF);
  } else {
    std::uint8_t bits = 0;
    for (std::size_t i = 0; i < obs.uncertainty.size(); ++i)
      if (obs.uncertainty[i]) bits |= static_cast<std::uint8_t>(1u << i);
    out.push_back(bits);
  }
  return out;
}

Observation decode_observation(const std::uint8_t* record) {
  Observation obs;
  std::memcpy(obs.vision.data(), record, obs.vision.size());
  for (std::size_t i = 0; i < obs.non_visual.size(); ++i)
    obs.non_visual[i] = get_le64(record + 100 + 8 * i);
  const std::uint8_t bits = record[100 + 48];
  if (bits != 0xFF) {
    if (bits > 0x0F) throw LogFormatError("invalid uncertainty byte in observation blob");
    obs.uncertainty.resize(kUncertaintySize);
    for (int i = 0; i < kUncertaintySize; ++i) obs.uncertainty[i] = (bits >> i) & 1u;
  }
  return obs;
}

void write_episode_log(const EpisodeLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write episode log " + path.string());
  out << header_to_json(log.header).dump() << '\n';
  for (const auto& s : log.steps) {
    const json rec = {{"type", "step"},
                      {"t", s.t},
                      {"case", std::string(case_tag(s.perturbation))},
                      {"a_tilde", s.a_tilde},
                      {"a", s.a},
                      {"reward", s.reward},
                      {"ego_position", s.ego_position},
                      {"ego_velocity", s.ego_velocity},
                      {"front_gap", gap_to_json(s.front_gap)},
                      {"obs", s.obs_index}};
    out << rec.dump() << '\n';
  }
  out << json{{"type", "end"}, {"kind", std::string(kind_name(log.kind))},
              {"t_terminal", log.t_terminal}}
             .dump()
      << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());

  std::filesystem::path blob_path = path;
  blob_path += ".obs";
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw std::runtime_error("cannot write " + blob_path.string());
  for (const auto& obs : log.observations) {
    const auto bytes = encode_observation(obs);
    blob.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
  }
}

EpisodeLog read_episode_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LogFormatError("cannot open episode log " + path.string());
  EpisodeLog log;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  bool have_end = false;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        if (have_header) throw LogFormatError("duplicate header");
        log.header = header_from_json(j);
        have_header = true;
      } else if (type == "step") {
        if (!have_header || have_end) throw LogFormatError("step record outside episode");
        StepRecord s;
        s.t = j.at("t").get<int>();
        s.perturbation = parse_case(j.at("case").get<std::string>());
        s.a_tilde = j.at("a_tilde").get<double>();
        s.a = j.at("a").get<double>();
        s.reward = j.at("reward").get<double>();
        s.ego_position = j.at("ego_position").get<double>();
        s.ego_velocity = j.at("ego_velocity").get<double>();
        s.front_gap = gap_from_json(j.at("front_gap"));
        s.obs_index = j.at("obs").get<std::size_t>();
        log.steps.push_back(s);
      } else if (type == "end") {
        if (!have_header) throw LogFormatError("end record before header");
        log.kind = parse_kind(j.at("kind").get<std::string>());
        log.t_terminal = j.at("t_terminal").get<int>();
        have_end = true;
      } else {
        throw LogFormatError("unknown record type '" + type + "'");
      }
    }
  } catch (const LogFormatError& e) {
    throw LogFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  } catch (const std::exception& e) {
    throw LogFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw LogFormatError(path.string() + ": missing header");
  if (!have_end) throw LogFormatError(path.string() + ": missing end record");

  std::filesystem::path blob_path = path;
  blob_path += ".obs";
  std::ifstream blob(blob_path, std::ios::binary);
  if (blob) {
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(blob)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() % kObservationRecordSize != 0)
      throw LogFormatError(blob_path.string() + ": truncated observation blob");
    for (std::size_t off = 0; off < bytes.size(); off += kObservationRecordSize)
      log.observations.push_back(decode_observation(bytes.data() + off));
    for (const auto& s : log.steps)
      if (s.obs_index >= log.observations.size())
        throw LogFormatError(path.string() + ": observation reference out of range");
  }
  return log;
}

ReplayResult replay_episode(const EpisodeLog& log,
                            const std::optional<std::filesystem::path>& grid_dir) {
  ReplayResult result;
  auto diverge = [&](int t, std::string what) {
    result.ok = false;
    result.first_divergent_step = t;
    result.message = "step " + std::to_string(t) + ": " + what;
    return result;
  };

  KeyValues keys = log.header.world_config;
  WorldConfig config;
  take_world_keys(keys, config);
  if (!keys.empty()) throw LogFormatError("unknown world key '" + keys.begin()->first + "'");
  DrivingEnv env(config, log.header.reward, log.header.informed, log.header.cases);
  env.reset(log.header.world_seed, log.header.schedule_seed);
  if (log.header.cases.mixed && !(env.schedule() == log.header.schedule))
    return diverge(0, "perturbation schedule differs from the logged one");
  const bool check_obs = !log.observations.empty();
  if (check_obs && !(env.observation() == log.observations.front()))
    return diverge(0, "initial observation differs");
  if (grid_dir) {
    std::filesystem::create_directories(*grid_dir);
    write_pgm(env.grid(), *grid_dir / "step_00000.pgm");
  }

  for (const StepRecord& rec : log.steps) {
    if (env.done()) return diverge(rec.t, "episode already terminated in replay");
    EnvStep st;
    try {
      st = env.step(rec.a_tilde);
    } catch (const std::exception& e) {
      return diverge(rec.t, e.what());
    }
    const WorldState& w = env.world();
    if (w.t != rec.t) return diverge(rec.t, "step counter mismatch");
    if (!same_bits(st.a, rec.a)) return diverge(rec.t, "filtered action differs");
    if (!same_bits(st.reward, rec.reward)) return diverge(rec.t, "reward differs");
    if (!same_bits(w.ego().position_m, rec.ego_position))
      return diverge(rec.t, "ego position differs");
    if (!same_bits(w.ego().velocity_mps, rec.ego_velocity))
      return diverge(rec.t, "ego velocity differs");
    if (!same_bits(st.front_gap, rec.front_gap)) return diverge(rec.t, "front gap differs");
    if (st.perturbation != rec.perturbation) return diverge(rec.t, "perturbation case differs");
    if (check_obs && !(st.observation == log.observations.at(rec.obs_index)))
      return diverge(rec.t, "observation differs");
    if (grid_dir) {
      char name[32];
      std::snprintf(name, sizeof(name), "step_%05d.pgm", rec.t);
      write_pgm(st.grid, *grid_dir / name);
    }
    ++result.steps_replayed;
  }

  const EpisodeKind replayed = env.world().status;
  const EpisodeKind expected =
      log.kind == EpisodeKind::aborted ? EpisodeKind::running : log.kind;
  if (replayed != expected)
    return diverge(env.world().t, "final status " + std::string(kind_name(replayed)) +
                                      " but log says " + std::string(kind_name(log.kind)));
  result.message = "replayed " + std::to_string(result.steps_replayed) + " steps bit-exactly";
  return result;
}

}  // namespace uadrive
