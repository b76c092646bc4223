#include "uadrive/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace uadrive {

double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Distribution Distribution::of(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("Distribution::of: empty sample");
  Distribution d;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  d.min = sorted.front();
  d.max = sorted.back();
  d.q1 = quantile_type7(sorted, 0.25);
  d.median = quantile_type7(sorted, 0.5);
  d.q3 = quantile_type7(sorted, 0.75);
  d.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  d.values = std::move(values);
  return d;
}

EpisodeMetrics episode_metrics(const EpisodeLog& log) {
  if (log.steps.empty()) throw std::invalid_argument("episode log has no steps");
  if (log.kind == EpisodeKind::running)
    throw std::invalid_argument("episode log is not complete");
  EpisodeMetrics m;
  m.episode_index = log.header.episode_index;
  m.tag = log.header.tag;
  m.kind = log.kind;
  m.steps = static_cast<int>(log.steps.size());
  m.traveled_distance_m = log.steps.back().ego_position;
  double velocity_sum = 0.0;
  for (const StepRecord& s : log.steps) {
    if (s.a < 0.0) ++m.brake_steps;
    else ++m.throttle_steps;
    velocity_sum += s.ego_velocity;
    m.cumulative_reward += s.reward;
    if (std::isfinite(s.front_gap)) m.front_distance_m.push_back(s.front_gap);
  }
  m.mean_velocity = velocity_sum / m.steps;
  m.brake_to_throttle_ratio =
      m.throttle_steps == 0
          ? std::numeric_limits<double>::infinity()
          : static_cast<double>(m.brake_steps) / static_cast<double>(m.throttle_steps);
  return m;
}

BehaviorMetrics aggregate_metrics(std::vector<EpisodeMetrics> episodes) {
  if (episodes.empty()) throw std::invalid_argument("compute_metrics: no episodes");
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const EpisodeMetrics& a, const EpisodeMetrics& b) {
                     return a.episode_index < b.episode_index;
                   });
  BehaviorMetrics out;
  out.episodes = static_cast<int>(episodes.size());
  std::vector<double> traveled, steps, ratio, gaps, velocity;
  long long brake = 0;
  long long total = 0;
  int finished = 0, collided = 0, timeout = 0, stalled = 0, aborted = 0;
  for (const EpisodeMetrics& m : episodes) {
    switch (m.kind) {
      case EpisodeKind::finished: ++finished; break;
      case EpisodeKind::collided: ++collided; break;
      case EpisodeKind::timeout: ++timeout; break;
      case EpisodeKind::stalled: ++stalled; break;
      case EpisodeKind::aborted: ++aborted; break;
      case EpisodeKind::running:
        throw std::invalid_argument("compute_metrics: episode still running");
    }
    traveled.push_back(m.traveled_distance_m);
    steps.push_back(m.steps);
    ratio.push_back(m.brake_to_throttle_ratio);
    velocity.push_back(m.mean_velocity);
    gaps.insert(gaps.end(), m.front_distance_m.begin(), m.front_distance_m.end());
    brake += m.brake_steps;
    total += m.steps;
  }
  const double n = out.episodes;
  out.finish_rate = finished / n;
  out.collision_rate = collided / n;
  out.timeout_rate = timeout / n;
  out.stalled_rate = stalled / n;
  out.aborted_rate = aborted / n;
  out.brake_frequency = static_cast<double>(brake) / static_cast<double>(total);
  out.traveled_distance_m = Distribution::of(std::move(traveled));
  out.episode_steps = Distribution::of(std::move(steps));
  out.brake_to_throttle_ratio = Distribution::of(std::move(ratio));
  if (!gaps.empty()) out.front_distance_m = Distribution::of(std::move(gaps));
  out.mean_velocity = Distribution::of(std::move(velocity));
  out.per_episode = std::move(episodes);
  return out;
}

BehaviorMetrics compute_metrics(std::span<const EpisodeLog> logs) {
  if (logs.empty()) throw std::invalid_argument("compute_metrics: no episode logs");
  std::vector<EpisodeMetrics> episodes;
  episodes.reserve(logs.size());
  for (const EpisodeLog& log : logs) episodes.push_back(episode_metrics(log));
  return aggregate_metrics(std::move(episodes));
}

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string metrics_csv_header() {
  return "row,tag,episode,kind,traveled_distance_m,episode_steps,brake_steps,throttle_steps,"
         "brake_to_throttle_ratio,mean_velocity,median_front_distance_m,cumulative_reward";
}

void write_metrics_csv(const BehaviorMetrics& m, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << metrics_csv_header() << '\n';
  for (const EpisodeMetrics& e : m.per_episode) {
    std::vector<double> gaps = e.front_distance_m;
    std::sort(gaps.begin(), gaps.end());
    const double gap_median = gaps.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : quantile_type7(gaps, 0.5);
    out << "episode," << e.tag << ',' << e.episode_index << ',' << kind_name(e.kind) << ','
        << num(e.traveled_distance_m) << ',' << e.steps << ',' << e.brake_steps << ','
        << e.throttle_steps << ',' << num(e.brake_to_throttle_ratio) << ','
        << num(e.mean_velocity) << ',' << num(gap_median) << ',' << num(e.cumulative_reward)
        << '\n';
  }
  long long brake = 0, throttle = 0;
  double reward = 0.0;
  for (const EpisodeMetrics& e : m.per_episode) {
    brake += e.brake_steps;
    throttle += e.throttle_steps;
    reward += e.cumulative_reward;
  }
  const std::string tag = m.per_episode.empty() ? "" : m.per_episode.front().tag;
  out << "summary," << tag << ',' << m.episodes << ",finish=" << num(m.finish_rate)
      << ";collision=" << num(m.collision_rate) << ";timeout=" << num(m.timeout_rate)
      << ";stalled=" << num(m.stalled_rate) << ";aborted=" << num(m.aborted_rate) << ','
      << num(m.traveled_distance_m.median) << ',' << num(m.episode_steps.median) << ','
      << brake << ',' << throttle << ',' << num(m.brake_to_throttle_ratio.median) << ','
      << num(m.mean_velocity.median) << ',' << num(m.front_distance_m.median) << ','
      << num(reward / std::max(1, m.episodes)) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_boxplot_csv(const BehaviorMetrics& m, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "panel,min,q1,median,q3,max,mean,count\n";
  auto row = [&](const char* name, const Distribution& d) {
    out << name << ',' << num(d.min) << ',' << num(d.q1) << ',' << num(d.median) << ','
        << num(d.q3) << ',' << num(d.max) << ',' << num(d.mean) << ',' << d.values.size()
        << '\n';
  };
  row("traveled_distance_m", m.traveled_distance_m);
  row("episode_steps", m.episode_steps);
  row("brake_to_throttle_ratio", m.brake_to_throttle_ratio);
  row("front_distance_m", m.front_distance_m);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string format_summary(const BehaviorMetrics& m, const std::string& title) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << title << " (" << m.episodes << " episodes)\n";
  os << "  finish " << m.finish_rate << "  collision " << m.collision_rate << "  timeout "
     << m.timeout_rate << "  stalled " << m.stalled_rate;
  if (m.aborted_rate > 0.0) os << "  aborted " << m.aborted_rate;
  os << "\n  brake frequency " << m.brake_frequency << '\n';
  auto line = [&](const char* name, const Distribution& d) {
    os << "  " << std::left << std::setw(24) << name << " min " << d.min << "  q1 " << d.q1
       << "  median " << d.median << "  q3 " << d.q3 << "  max " << d.max << '\n';
  };
  line("traveled_distance_m", m.traveled_distance_m);
  line("episode_steps", m.episode_steps);
  line("brake_to_throttle_ratio", m.brake_to_throttle_ratio);
  line("front_distance_m", m.front_distance_m);
  line("mean_velocity", m.mean_velocity);
  return os.str();
}

ReferenceTrace record_human_reference(const EpisodeLog& log) {
  if (log.header.tag != "human")
    throw LogFormatError("reference traces come from human-tagged logs, got '" +
                         log.header.tag + "'");
  if (log.steps.empty()) throw LogFormatError("teleop log has no steps");
  if (log.kind == EpisodeKind::running) throw LogFormatError("teleop log is not finalized");
  ReferenceTrace trace;
  trace.tag = log.header.tag;
  for (const StepRecord& s : log.steps) {
    trace.t.push_back(s.t);
    trace.velocity.push_back(s.ego_velocity);
    trace.front_gap.push_back(s.front_gap);
    trace.a_tilde.push_back(s.a_tilde);
  }
  return trace;
}

void write_trace_csv(const ReferenceTrace& trace, const std::filesystem::path& path) {
  std::ofstream out = open_csv(path);
  out << "t,velocity,front_gap,a_tilde\n";
  for (std::size_t i = 0; i < trace.t.size(); ++i)
    out << trace.t[i] << ',' << num(trace.velocity[i]) << ',' << num(trace.front_gap[i]) << ','
        << num(trace.a_tilde[i]) << '\n';
}

}  // namespace uadrive
