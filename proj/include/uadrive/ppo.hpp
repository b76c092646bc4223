#ifndef UADRIVE_PPO_HPP_
#define UADRIVE_PPO_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "uadrive/config.hpp"
#include "uadrive/policy.hpp"

namespace uadrive {

using Rng = std::mt19937_64;

enum class OptimizerKind : std::uint8_t { sgd, adam };

std::string_view optimizer_name(OptimizerKind kind);

struct PpoHyperParams {
  double gamma = 0.999;
  double clip_eps = 0.2;
  double learning_rate = 1e-5;
  double value_loss_scale = 0.5;
  double entropy_scale = 0.01;
  double sigma_init = 0.1;
  double sigma_decrement = 0.025;
  long long sigma_interval_steps = 500000;
  double sigma_floor = 0.0;
  int rollout_length = 2048;
  int minibatch_size = 256;
  int epochs_per_update = 4;
  double gae_lambda = 0.95;
  // Multiplies rewards before return/advantage computation only.
  double reward_scale = 1.0;
  OptimizerKind optimizer = OptimizerKind::sgd;
  int hidden_size = 256;

  void validate() const;
};

void take_ppo_keys(KeyValues& values, PpoHyperParams& h);
KeyValues ppo_keys(const PpoHyperParams& h);

struct Transition {
  Eigen::VectorXd features;
  double action_raw = 0.0;  // unclamped Gaussian draw
  double action = 0.0;      // clamped command sent to the environment
  double logp = 0.0;
  double sigma = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
  double advantage = 0.0;
  double ret = 0.0;
};

struct ActionSample {
  double a_tilde = 0.0;
  double raw = 0.0;
  double logp = 0.0;
};

double gaussian_logp(double x, double mu, double sigma);

// Draws from N(mu, sigma^2), clamps to [-1, 1]. sigma == 0 returns mu.
ActionSample sample_action(double mu, double sigma, Rng& rng);

inline double deterministic_action(double mu) { return mu; }

double sigma_schedule(long long global_step, const PpoHyperParams& h);

// Entropy of N(., sigma^2); -inf at sigma == 0.
double gaussian_entropy(double sigma);

enum class AdvantageNormalization { none, per_batch };

// GAE over a rollout that may span several episodes. `bootstrap_value` is
// V(s) after the last transition when that transition is not terminal.
// Throws std::invalid_argument on an empty rollout.
void compute_advantages(std::vector<Transition>& rollout, double bootstrap_value,
                        const PpoHyperParams& h,
                        AdvantageNormalization norm = AdvantageNormalization::per_batch);

struct PpoBatch {
  Eigen::MatrixXd features;  // input x N
  Eigen::VectorXd actions;   // unclamped draws
  Eigen::VectorXd old_logp;
  Eigen::VectorXd sigmas;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return actions.size(); }
};

PpoBatch make_batch(std::span<const Transition> rollout,
                    std::span<const std::size_t> indices);

struct LossBreakdown {
  double total = 0.0;
  double policy = 0.0;    // -mean clipped surrogate
  double value = 0.0;     // mean squared error
  double entropy = 0.0;   // mean entropy over stochastic samples
  double clip_fraction = 0.0;
};

// Loss = policy + value_loss_scale * value - entropy_scale * entropy.
// Fills `grad` (d loss / d params) when non-null.
LossBreakdown ppo_loss(const PpoBatch& batch, const PolicyParams& params,
                       const PpoHyperParams& h, Eigen::VectorXd* grad);

// Per-sample clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  OptimizerKind kind() const { return kind_; }
  long long steps() const { return steps_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long long steps_ = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int minibatches = 0;
};

// Shuffled-minibatch gradient descent on the PPO loss. Throws
// TrainingDiverged (params untouched) on a non-finite loss or gradient.
UpdateStats ppo_update(std::span<const Transition> batch, PolicyParams& params,
                       const PpoHyperParams& h, Optimizer& optimizer, Rng& rng);

}  // namespace uadrive

#endif  // UADRIVE_PPO_HPP_
