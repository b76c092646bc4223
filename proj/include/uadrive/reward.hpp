#ifndef UADRIVE_REWARD_HPP_
#define UADRIVE_REWARD_HPP_

#include <span>

#include "uadrive/sim_core.hpp"

namespace uadrive {

struct RewardParams {
  double beta = 3.0;
  double beta_tilde = 2.0;
  double alpha = 50.0;
  double alpha_tilde = 100.0;
  int t_max = 7500;

  void validate() const;
};

// Progress toward the target over one step, 1-D distances.
double momentary_speed(double loc_prev, double loc_now, double loc_final);

// Weight beta + beta_tilde * (1 - t / t_max) applied to the momentary speed.
double time_weight(int t, const RewardParams& params);

// Terminal rewards replace the per-step term.
double compute_reward(int t, double v_mom, const EpisodeStatus& status,
                      const RewardParams& params);

// Undiscounted sum used for analysis.
double cumulative_reward(std::span<const double> rewards);

}  // namespace uadrive

#endif  // UADRIVE_REWARD_HPP_
