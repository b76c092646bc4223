#include "uadrive/policy.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace uadrive {

namespace {

struct Offsets {
  std::size_t w1, b1, w2, b2, w_mu, b_mu, w_v, b_v, total;
};

Offsets offsets(int input, int hidden) {
  const auto i = static_cast<std::size_t>(input);
  const auto h = static_cast<std::size_t>(hidden);
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + h * i;
  o.w2 = o.b1 + h;
  o.b2 = o.w2 + h * h;
  o.w_mu = o.b2 + h;
  o.b_mu = o.w_mu + h;
  o.w_v = o.b_mu + 1;
  o.b_v = o.w_v + h;
  o.total = o.b_v + 1;
  return o;
}

}  // namespace

std::size_t PolicyParams::parameter_count(int input_size, int hidden_size) {
  return offsets(input_size, hidden_size).total;
}

PolicyParams PolicyParams::zeros(int input_size, int hidden_size) {
  if (input_size <= 0 || hidden_size <= 0)
    throw std::invalid_argument("PolicyParams: sizes must be positive");
  PolicyParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.flat = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(parameter_count(input_size, hidden_size)));
  return p;
}

PolicyParams PolicyParams::initialized(int input_size, int hidden_size,
                                       std::uint64_t seed, double initial_mu) {
  if (!(initial_mu > -1.0 && initial_mu < 1.0))
    throw std::invalid_argument("initial_mu must lie in (-1, 1)");
  PolicyParams p = zeros(input_size, hidden_size);
  const Offsets o = offsets(input_size, hidden_size);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto fill = [&](std::size_t begin, std::size_t count, double scale) {
    for (std::size_t k = 0; k < count; ++k)
      p.flat[static_cast<Eigen::Index>(begin + k)] = scale * normal(rng);
  };
  const auto h = static_cast<std::size_t>(hidden_size);
  fill(o.w1, h * static_cast<std::size_t>(input_size), 1.0 / std::sqrt(input_size));
  fill(o.w2, h * h, 1.0 / std::sqrt(hidden_size));
  fill(o.w_mu, h, 0.01 / std::sqrt(hidden_size));
  fill(o.w_v, h, 1.0 / std::sqrt(hidden_size));
  p.flat[static_cast<Eigen::Index>(o.b_mu)] = std::atanh(initial_mu);
  return p;
}

Eigen::Map<const Eigen::MatrixXd> PolicyParams::w1() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.w1, hidden_size, input_size};
}
Eigen::Map<const Eigen::VectorXd> PolicyParams::b1() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.b1, hidden_size};
}
Eigen::Map<const Eigen::MatrixXd> PolicyParams::w2() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.w2, hidden_size, hidden_size};
}
Eigen::Map<const Eigen::VectorXd> PolicyParams::b2() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.b2, hidden_size};
}
Eigen::Map<const Eigen::RowVectorXd> PolicyParams::w_mu() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.w_mu, hidden_size};
}
double PolicyParams::b_mu() const {
  return flat[static_cast<Eigen::Index>(offsets(input_size, hidden_size).b_mu)];
}
Eigen::Map<const Eigen::RowVectorXd> PolicyParams::w_v() const {
  const Offsets o = offsets(input_size, hidden_size);
  return {flat.data() + o.w_v, hidden_size};
}
double PolicyParams::b_v() const {
  return flat[static_cast<Eigen::Index>(offsets(input_size, hidden_size).b_v)];
}

Eigen::VectorXd observation_features(const Observation& obs) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(obs.size()));
  Eigen::Index k = 0;
  for (auto v : obs.vision)
    x[k++] = (static_cast<double>(v) - kVisionFeatureCenter) / kVisionFeatureSpread;
  for (std::size_t i = 0; i < obs.non_visual.size(); ++i)
    x[k++] = i == kVelocitySlot ? obs.non_visual[i] * kVelocityFeatureScale : obs.non_visual[i];
  for (auto v : obs.uncertainty) x[k++] = static_cast<double>(v);
  return x;
}

PolicyOutput policy_forward(const Eigen::VectorXd& features,
                            const PolicyParams& params) {
  if (features.size() != params.input_size)
    throw std::invalid_argument(
        "policy_forward: observation has " + std::to_string(features.size()) +
        " values, network expects " + std::to_string(params.input_size));
  const Eigen::VectorXd h1 =
      (params.w1() * features + params.b1()).array().tanh().matrix();
  const Eigen::VectorXd h2 =
      (params.w2() * h1 + params.b2()).array().tanh().matrix();
  PolicyOutput out;
  out.mu = std::tanh(params.w_mu().dot(h2) + params.b_mu());
  out.value = params.w_v().dot(h2) + params.b_v();
  return out;
}

PolicyOutput policy_forward(const Observation& obs, const PolicyParams& params) {
  return policy_forward(observation_features(obs), params);
}

ForwardCache forward_batch(const Eigen::MatrixXd& features,
                           const PolicyParams& params) {
  if (features.rows() != params.input_size)
    throw std::invalid_argument("forward_batch: feature rows do not match the network input");
  ForwardCache c;
  c.h1.noalias() = params.w1() * features;
  c.h1.colwise() += params.b1();
  c.h1 = c.h1.array().tanh().matrix();
  c.h2.noalias() = params.w2() * c.h1;
  c.h2.colwise() += params.b2();
  c.h2 = c.h2.array().tanh().matrix();
  c.mu = ((params.w_mu() * c.h2).array() + params.b_mu()).tanh().matrix();
  c.value = ((params.w_v() * c.h2).array() + params.b_v()).matrix();
  return c;
}

Eigen::VectorXd backward_batch(const Eigen::MatrixXd& features,
                               const ForwardCache& cache,
                               const Eigen::RowVectorXd& grad_mu,
                               const Eigen::RowVectorXd& grad_value,
                               const PolicyParams& params) {
  const Offsets o = offsets(params.input_size, params.hidden_size);
  const Eigen::Index h = params.hidden_size;
  const Eigen::Index in = params.input_size;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.flat.size());

  const Eigen::RowVectorXd dz_mu =
      (grad_mu.array() * (1.0 - cache.mu.array().square())).matrix();

  Eigen::Map<Eigen::RowVectorXd>(grad.data() + o.w_mu, h).noalias() =
      dz_mu * cache.h2.transpose();
  grad[static_cast<Eigen::Index>(o.b_mu)] = dz_mu.sum();
  Eigen::Map<Eigen::RowVectorXd>(grad.data() + o.w_v, h).noalias() =
      grad_value * cache.h2.transpose();
  grad[static_cast<Eigen::Index>(o.b_v)] = grad_value.sum();

  Eigen::MatrixXd dz2 = params.w_mu().transpose() * dz_mu;
  dz2.noalias() += params.w_v().transpose() * grad_value;
  dz2.array() *= 1.0 - cache.h2.array().square();

  Eigen::Map<Eigen::MatrixXd>(grad.data() + o.w2, h, h).noalias() =
      dz2 * cache.h1.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.data() + o.b2, h) = dz2.rowwise().sum();

  Eigen::MatrixXd dz1 = params.w2().transpose() * dz2;
  dz1.array() *= 1.0 - cache.h1.array().square();

  Eigen::Map<Eigen::MatrixXd>(grad.data() + o.w1, h, in).noalias() =
      dz1 * features.transpose();
  Eigen::Map<Eigen::VectorXd>(grad.data() + o.b1, h) = dz1.rowwise().sum();
  return grad;
}

}  // namespace uadrive
