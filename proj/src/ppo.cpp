#include "uadrive/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace uadrive {

std::string_view optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

void PpoHyperParams::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0))
    throw ConfigError("clip_eps must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0))
    throw ConfigError("gae_lambda must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (sigma_init < sigma_floor || sigma_floor < 0.0 || sigma_decrement < 0.0)
    throw ConfigError("need sigma_init >= sigma_floor >= 0 and sigma_decrement >= 0");
  if (sigma_interval_steps <= 0) throw ConfigError("sigma_interval_steps must be > 0");
  if (rollout_length <= 0 || minibatch_size <= 0 || epochs_per_update <= 0)
    throw ConfigError("rollout_length, minibatch_size and epochs_per_update must be > 0");
  if (hidden_size <= 0) throw ConfigError("hidden_size must be > 0");
  if (!(reward_scale > 0.0)) throw ConfigError("reward_scale must be > 0");
}

void take_ppo_keys(KeyValues& values, PpoHyperParams& h) {
  auto num = [&](const char* key, auto& field) {
    auto it = values.find(key);
    if (it == values.end()) return;
    try {
      std::size_t used = 0;
      if constexpr (std::is_floating_point_v<std::remove_reference_t<decltype(field)>>) {
        field = std::stod(it->second, &used);
      } else {
        field = static_cast<std::remove_reference_t<decltype(field)>>(
            std::stoll(it->second, &used));
      }
      if (used != it->second.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError(std::string("key '") + key + "': invalid number '" +
                        it->second + "'");
    }
    values.erase(it);
  };
  num("gamma", h.gamma);
  num("clip_eps", h.clip_eps);
  num("learning_rate", h.learning_rate);
  num("value_loss_scale", h.value_loss_scale);
  num("entropy_scale", h.entropy_scale);
  num("sigma_init", h.sigma_init);
  num("sigma_decrement", h.sigma_decrement);
  num("sigma_interval_steps", h.sigma_interval_steps);
  num("sigma_floor", h.sigma_floor);
  num("rollout_length", h.rollout_length);
  num("minibatch_size", h.minibatch_size);
  num("epochs_per_update", h.epochs_per_update);
  num("gae_lambda", h.gae_lambda);
  num("reward_scale", h.reward_scale);
  num("hidden_size", h.hidden_size);
  if (auto it = values.find("optimizer"); it != values.end()) {
    if (it->second == "adam") h.optimizer = OptimizerKind::adam;
    else if (it->second == "sgd") h.optimizer = OptimizerKind::sgd;
    else throw ConfigError("optimizer must be 'sgd' or 'adam'");
    values.erase(it);
  }
}

KeyValues ppo_keys(const PpoHyperParams& h) {
  KeyValues out;
  out["gamma"] = format_double(h.gamma);
  out["clip_eps"] = format_double(h.clip_eps);
  out["learning_rate"] = format_double(h.learning_rate);
  out["value_loss_scale"] = format_double(h.value_loss_scale);
  out["entropy_scale"] = format_double(h.entropy_scale);
  out["sigma_init"] = format_double(h.sigma_init);
  out["sigma_decrement"] = format_double(h.sigma_decrement);
  out["sigma_interval_steps"] = std::to_string(h.sigma_interval_steps);
  out["sigma_floor"] = format_double(h.sigma_floor);
  out["rollout_length"] = std::to_string(h.rollout_length);
  out["minibatch_size"] = std::to_string(h.minibatch_size);
  out["epochs_per_update"] = std::to_string(h.epochs_per_update);
  out["gae_lambda"] = format_double(h.gae_lambda);
  out["reward_scale"] = format_double(h.reward_scale);
  out["optimizer"] = std::string(optimizer_name(h.optimizer));
  out["hidden_size"] = std::to_string(h.hidden_size);
  return out;
}

double gaussian_logp(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

ActionSample sample_action(double mu, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("sample_action: sigma must be >= 0");
  ActionSample out;
  if (sigma == 0.0) {
    out.a_tilde = mu;
    out.raw = mu;
    out.logp = 0.0;
    return out;
  }
  std::normal_distribution<double> normal(mu, sigma);
  out.raw = normal(rng);
  out.a_tilde = std::clamp(out.raw, -1.0, 1.0);
  out.logp = gaussian_logp(out.raw, mu, sigma);
  return out;
}

double sigma_schedule(long long global_step, const PpoHyperParams& h) {
  if (global_step < 0) throw std::invalid_argument("sigma_schedule: negative step");
  const long long decrements = global_step / h.sigma_interval_steps;
  return std::max(h.sigma_floor,
                  h.sigma_init - h.sigma_decrement * static_cast<double>(decrements));
}

double gaussian_entropy(double sigma) {
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * sigma * sigma);
}

void compute_advantages(std::vector<Transition>& rollout, double bootstrap_value,
                        const PpoHyperParams& h, AdvantageNormalization norm) {
  if (rollout.empty()) throw std::invalid_argument("compute_advantages: empty rollout");
  double gae = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t k = rollout.size(); k-- > 0;) {
    Transition& tr = rollout[k];
    const double not_done = tr.done ? 0.0 : 1.0;
    const double delta =
        h.reward_scale * tr.reward + h.gamma * next_value * not_done - tr.value;
    gae = delta + h.gamma * h.gae_lambda * not_done * gae;
    tr.advantage = gae;
    tr.ret = gae + tr.value;
    next_value = tr.value;
  }
  if (norm == AdvantageNormalization::none) return;
  const double n = static_cast<double>(rollout.size());
  double mean = 0.0;
  for (const auto& tr : rollout) mean += tr.advantage;
  mean /= n;
  double var = 0.0;
  for (const auto& tr : rollout) var += (tr.advantage - mean) * (tr.advantage - mean);
  const double stddev = std::sqrt(var / n);
  for (auto& tr : rollout) tr.advantage = (tr.advantage - mean) / (stddev + 1e-8);
}

PpoBatch make_batch(std::span<const Transition> rollout,
                    std::span<const std::size_t> indices) {
  PpoBatch batch;
  const auto n = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index in = rollout[indices.front()].features.size();
  batch.features.resize(in, n);
  batch.actions.resize(n);
  batch.old_logp.resize(n);
  batch.sigmas.resize(n);
  batch.advantages.resize(n);
  batch.returns.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& tr = rollout[indices[static_cast<std::size_t>(j)]];
    batch.features.col(j) = tr.features;
    batch.actions[j] = tr.action_raw;
    batch.old_logp[j] = tr.logp;
    batch.sigmas[j] = tr.sigma;
    batch.advantages[j] = tr.advantage;
    batch.returns[j] = tr.ret;
  }
  return batch;
}

double clipped_surrogate(double ratio, double advantage, double clip_eps) {
  const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
  return std::min(ratio * advantage, clipped * advantage);
}

LossBreakdown ppo_loss(const PpoBatch& batch, const PolicyParams& params,
                       const PpoHyperParams& h, Eigen::VectorXd* grad) {
  const Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("ppo_loss: empty batch");
  const ForwardCache cache = forward_batch(batch.features, params);
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::RowVectorXd grad_mu = Eigen::RowVectorXd::Zero(n);
  Eigen::RowVectorXd grad_value(n);
  LossBreakdown loss;
  int stochastic = 0;
  int clipped = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double sigma = batch.sigmas[j];
    if (sigma > 0.0) {
      ++stochastic;
      const double mu = cache.mu[j];
      const double x = batch.actions[j];
      const double a = batch.advantages[j];
      const double ratio = std::exp(gaussian_logp(x, mu, sigma) - batch.old_logp[j]);
      const double unclipped = ratio * a;
      const double surrogate = clipped_surrogate(ratio, a, h.clip_eps);
      loss.policy -= surrogate * inv_n;
      if (unclipped <= surrogate) {
        // d ratio / d mu = ratio * (x - mu) / sigma^2
        grad_mu[j] = -a * ratio * (x - mu) / (sigma * sigma) * inv_n;
      } else {
        ++clipped;
      }
      loss.entropy += gaussian_entropy(sigma);
    }
    const double err = cache.value[j] - batch.returns[j];
    loss.value += err * err * inv_n;
    grad_value[j] = 2.0 * h.value_loss_scale * err * inv_n;
  }
  if (stochastic > 0) {
    loss.entropy /= stochastic;
    loss.clip_fraction = static_cast<double>(clipped) / stochastic;
  }
  loss.total = loss.policy + h.value_loss_scale * loss.value - h.entropy_scale * loss.entropy;
  // sigma is scheduled, not learned: the entropy term has no parameter gradient.
  if (grad != nullptr) *grad = backward_batch(batch.features, cache, grad_mu, grad_value, params);
  return loss;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size)
    : kind_(kind), lr_(learning_rate) {
  if (kind_ == OptimizerKind::adam) {
    m_ = Eigen::VectorXd::Zero(size);
    v_ = Eigen::VectorXd::Zero(size);
  }
}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  ++steps_;
  if (kind_ == OptimizerKind::sgd) {
    params.noalias() -= lr_ * grad;
    return;
  }
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

UpdateStats ppo_update(std::span<const Transition> batch, PolicyParams& params,
                       const PpoHyperParams& h, Optimizer& optimizer, Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");
  PolicyParams work = params;
  Optimizer work_opt = optimizer;
  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(h.minibatch_size);

  UpdateStats stats;
  Eigen::VectorXd grad;
  for (int epoch = 0; epoch < h.epochs_per_update; ++epoch) {
    // Fisher-Yates with raw engine output keeps the order stable across
    // standard library implementations.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const std::size_t count = std::min(mb, order.size() - start);
      const PpoBatch minibatch =
          make_batch(batch, std::span<const std::size_t>(order).subspan(start, count));
      const LossBreakdown loss = ppo_loss(minibatch, work, h, &grad);
      if (!std::isfinite(loss.total))
        throw TrainingDiverged("ppo_update: non-finite loss (policy " +
                               std::to_string(loss.policy) + ", value " +
                               std::to_string(loss.value) + ")");
      if (!grad.allFinite()) throw TrainingDiverged("ppo_update: non-finite gradient");
      work_opt.step(work.flat, grad);
      if (!work.all_finite()) throw TrainingDiverged("ppo_update: non-finite parameters");
      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.clip_fraction += loss.clip_fraction;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double k = stats.minibatches;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
  }
  params = std::move(work);
  optimizer = std::move(work_opt);
  return stats;
}

}  // namespace uadrive
