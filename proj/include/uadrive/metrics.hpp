#ifndef UADRIVE_METRICS_HPP_
#define UADRIVE_METRICS_HPP_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uadrive/episode_log.hpp"

namespace uadrive {

// Five-number summary; quantiles use linear interpolation between order
// statistics (R type 7).
struct Distribution {
  std::vector<double> values;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;

  // Throws std::invalid_argument on empty input.
  static Distribution of(std::vector<double> values);
};

// p in [0, 1]; `sorted` must be non-empty and ascending.
double quantile_type7(std::span<const double> sorted, double p);

struct EpisodeMetrics {
  int episode_index = 0;
  std::string tag;
  EpisodeKind kind = EpisodeKind::running;
  double traveled_distance_m = 0.0;  // final ego position
  int steps = 0;
  int brake_steps = 0;     // filtered a < 0
  int throttle_steps = 0;  // filtered a >= 0
  // brake_steps / throttle_steps; +inf when the ego never throttled.
  double brake_to_throttle_ratio = 0.0;
  double mean_velocity = 0.0;
  double cumulative_reward = 0.0;
  std::vector<double> front_distance_m;  // finite per-step gaps only
};

struct BehaviorMetrics {
  int episodes = 0;
  double finish_rate = 0.0;
  double collision_rate = 0.0;
  double timeout_rate = 0.0;
  double stalled_rate = 0.0;
  double aborted_rate = 0.0;
  // Fraction of all steps with a < 0, pooled over episodes.
  double brake_frequency = 0.0;
  Distribution traveled_distance_m;
  Distribution episode_steps;
  Distribution brake_to_throttle_ratio;
  Distribution front_distance_m;  // pooled per-step samples
  Distribution mean_velocity;
  std::vector<EpisodeMetrics> per_episode;
};

// Throws std::invalid_argument for a log without steps or still running.
EpisodeMetrics episode_metrics(const EpisodeLog& log);

// Episodes are ordered by index, so the result does not depend on the
// order logs were produced in. Throws std::invalid_argument on empty input.
BehaviorMetrics compute_metrics(std::span<const EpisodeLog> logs);
BehaviorMetrics aggregate_metrics(std::vector<EpisodeMetrics> episodes);

// One row per episode plus a trailing summary row.
void write_metrics_csv(const BehaviorMetrics& metrics, const std::filesystem::path& path);
std::string metrics_csv_header();

// Long format: panel,statistic,value for the four boxplot panels.
void write_boxplot_csv(const BehaviorMetrics& metrics, const std::filesystem::path& path);

// Compact multi-line text table for terminals.
std::string format_summary(const BehaviorMetrics& metrics, const std::string& title);

struct ReferenceTrace {
  std::string tag;
  std::vector<int> t;
  std::vector<double> velocity;
  std::vector<double> front_gap;  // +inf when nothing is ahead
  std::vector<double> a_tilde;
};

// Throws LogFormatError for an empty or unfinished log or one not tagged
// "human".
ReferenceTrace record_human_reference(const EpisodeLog& log);

// Columns t,velocity,front_gap,a_tilde.
void write_trace_csv(const ReferenceTrace& trace, const std::filesystem::path& path);

}  // namespace uadrive

#endif  // UADRIVE_METRICS_HPP_
