#include "uadrive/reward.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace uadrive {

void RewardParams::validate() const {
  if (!(beta > 0.0 && beta_tilde > 0.0 && alpha > 0.0 && alpha_tilde > 0.0) ||
      t_max <= 0) {
    throw ConfigError("reward constants must all be strictly positive");
  }
}

double momentary_speed(double loc_prev, double loc_now, double loc_final) {
  return std::abs(loc_final - loc_prev) - std::abs(loc_final - loc_now);
}

double time_weight(int t, const RewardParams& params) {
  return params.beta +
         params.beta_tilde * (1.0 - static_cast<double>(t) / params.t_max);
}

double compute_reward(int t, double v_mom, const EpisodeStatus& status,
                      const RewardParams& params) {
  if (t < 0) throw std::invalid_argument("compute_reward: t must be >= 0");
  switch (status.kind) {
    case EpisodeKind::finished:
      return params.alpha_tilde;
    case EpisodeKind::collided:
    case EpisodeKind::timeout:
    case EpisodeKind::stalled:
    case EpisodeKind::aborted:
      return -params.alpha;
    case EpisodeKind::running:
      break;
  }
  return time_weight(t, params) * v_mom;
}

double cumulative_reward(std::span<const double> rewards) {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

}  // namespace uadrive
