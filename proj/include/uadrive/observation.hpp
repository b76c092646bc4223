#ifndef UADRIVE_OBSERVATION_HPP_
#define UADRIVE_OBSERVATION_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "uadrive/perception.hpp"
#include "uadrive/sim_core.hpp"

namespace uadrive {

inline constexpr int kVisionSize = kGridCells;
inline constexpr int kNonVisualSize = 6;
inline constexpr int kUncertaintySize = 4;

// Train/test regime: perception correct or perturbed, agent informed or not.
struct ScenarioCase {
  int id = 1;
  bool perturbed = false;
  bool informed = false;

  friend bool operator==(const ScenarioCase&, const ScenarioCase&) = default;
};

// Throws std::invalid_argument for ids outside 1..4.
ScenarioCase scenario_case(int id);

// Observation length for an agent with or without the uncertainty channel.
constexpr int observation_size(bool informed) {
  return kVisionSize + kNonVisualSize + (informed ? kUncertaintySize : 0);
}

struct Observation {
  std::array<std::uint8_t, kVisionSize> vision{};
  // throttle, brake, velocity, normalized velocity, orientation, lane offset
  std::array<double, kNonVisualSize> non_visual{};
  std::vector<std::uint8_t> uncertainty;  // empty or four bits

  std::size_t size() const {
    return vision.size() + non_visual.size() + uncertainty.size();
  }

  friend bool operator==(const Observation&, const Observation&) = default;
};

std::uint8_t grayscale(CellClass c);

std::vector<std::uint8_t> encode_uncertainty(PerturbationCase c, bool informed);
inline std::vector<std::uint8_t> encode_uncertainty(PerturbationCase c,
                                                    const ScenarioCase& s) {
  return encode_uncertainty(c, s.informed);
}

// `grid` must already carry the perturbation for `c`.
Observation assemble_observation(const SemanticGrid& grid,
                                 const WorldState& world, double a_prev,
                                 PerturbationCase c, bool informed,
                                 const WorldConfig& config);

// Gray image back to classes. Throws on values outside the palette.
SemanticGrid grid_from_vision(const std::array<std::uint8_t, kVisionSize>& vision);

}  // namespace uadrive

#endif  // UADRIVE_OBSERVATION_HPP_
