#ifndef UADRIVE_POLICY_HPP_
#define UADRIVE_POLICY_HPP_

#include <Eigen/Dense>
#include <cstdint>

#include "uadrive/observation.hpp"

namespace uadrive {

// Two tanh hidden layers shared by a mean head (tanh-squashed) and a value
// head. All weights live in one flat vector so optimizers and checkpoints
// handle a single buffer.
//
// Layout (column-major blocks): W1 [H x I], b1 [H], W2 [H x H], b2 [H],
// w_mu [H], b_mu [1], w_v [H], b_v [1].
struct PolicyParams {
  int input_size = 0;
  int hidden_size = 0;
  Eigen::VectorXd flat;

  static std::size_t parameter_count(int input_size, int hidden_size);
  static PolicyParams zeros(int input_size, int hidden_size);
  // Scaled Gaussian init. The mean head starts nearly flat around
  // `initial_mu`, which must lie in (-1, 1).
  static PolicyParams initialized(int input_size, int hidden_size,
                                  std::uint64_t seed, double initial_mu = 0.0);

  Eigen::Map<const Eigen::MatrixXd> w1() const;
  Eigen::Map<const Eigen::VectorXd> b1() const;
  Eigen::Map<const Eigen::MatrixXd> w2() const;
  Eigen::Map<const Eigen::VectorXd> b2() const;
  Eigen::Map<const Eigen::RowVectorXd> w_mu() const;
  double b_mu() const;
  Eigen::Map<const Eigen::RowVectorXd> w_v() const;
  double b_v() const;

  bool all_finite() const { return flat.allFinite(); }
};

// Raw velocity (m/s) is the only unbounded input; it enters the network
// rescaled so that every feature is O(1).
inline constexpr std::size_t kVelocitySlot = 2;
inline constexpr double kVelocityFeatureScale = 0.05;

// Vision enters centered on the road gray level, so empty road is 0 and the
// weak contrast between road and other vehicles becomes a unit step.
inline constexpr double kVisionFeatureCenter = 90.0;
inline constexpr double kVisionFeatureSpread = 60.0;

// Network input: centered vision, non-visual values as-is except the raw
// velocity slot (times kVelocityFeatureScale), uncertainty bits.
Eigen::VectorXd observation_features(const Observation& obs);

struct PolicyOutput {
  double mu = 0.0;
  double value = 0.0;
};

// Throws std::invalid_argument when the observation length does not match
// the network input.
PolicyOutput policy_forward(const Observation& obs, const PolicyParams& params);
PolicyOutput policy_forward(const Eigen::VectorXd& features,
                            const PolicyParams& params);

// Column-batched forward pass with the activations needed for backprop.
struct ForwardCache {
  Eigen::MatrixXd h1;  // H x N
  Eigen::MatrixXd h2;  // H x N
  Eigen::RowVectorXd mu;
  Eigen::RowVectorXd value;
};

ForwardCache forward_batch(const Eigen::MatrixXd& features,
                           const PolicyParams& params);

// Accumulates parameter gradients given dL/dmu and dL/dV per column.
Eigen::VectorXd backward_batch(const Eigen::MatrixXd& features,
                               const ForwardCache& cache,
                               const Eigen::RowVectorXd& grad_mu,
                               const Eigen::RowVectorXd& grad_value,
                               const PolicyParams& params);

}  // namespace uadrive

#endif  // UADRIVE_POLICY_HPP_
