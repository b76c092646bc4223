#include "uadrive/observation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace uadrive {

ScenarioCase scenario_case(int id) {
  switch (id) {
    case 1: return {1, false, false};
    case 2: return {2, true, false};
    case 3: return {3, true, true};
    case 4: return {4, false, true};
    default:
      throw std::invalid_argument("scenario id must be 1..4, got " +
                                  std::to_string(id));
  }
}

std::uint8_t grayscale(CellClass c) {
  switch (c) {
    case CellClass::road: return 90;
    case CellClass::lane_marking: return 160;
    case CellClass::ego_vehicle: return 220;
    case CellClass::other_vehicle: return 30;
  }
  throw std::invalid_argument("grayscale: unknown class id " +
                              std::to_string(static_cast<int>(c)));
}

std::vector<std::uint8_t> encode_uncertainty(PerturbationCase c, bool informed) {
  if (!informed) return {};
  std::vector<std::uint8_t> bits(kUncertaintySize, 0);
  if (c != PerturbationCase::VEVV) bits[static_cast<std::size_t>(c)] = 1;
  return bits;
}

Observation assemble_observation(const SemanticGrid& grid,
                                 const WorldState& world, double a_prev,
                                 PerturbationCase c, bool informed,
                                 const WorldConfig& config) {
  Observation obs;
  for (int i = 0; i < kVisionSize; ++i) obs.vision[i] = grayscale(grid.cells[i]);
  const double velocity = world.ego().velocity_mps;
  obs.non_visual = {std::max(a_prev, 0.0),
                    std::max(-a_prev, 0.0),
                    velocity,
                    velocity / config.v_cap,
                    0.0,   // heading relative to the straight lane
                    0.0};  // lateral offset; the ego never leaves the center
  obs.uncertainty = encode_uncertainty(c, informed);
  return obs;
}

SemanticGrid grid_from_vision(const std::array<std::uint8_t, kVisionSize>& vision) {
  SemanticGrid grid;
  for (int i = 0; i < kVisionSize; ++i) {
    switch (vision[i]) {
      case 90: grid.cells[i] = CellClass::road; break;
      case 160: grid.cells[i] = CellClass::lane_marking; break;
      case 220: grid.cells[i] = CellClass::ego_vehicle; break;
      case 30: grid.cells[i] = CellClass::other_vehicle; break;
      default:
        throw std::invalid_argument("grid_from_vision: gray value " +
                                    std::to_string(vision[i]) +
                                    " is not in the palette");
    }
  }
  return grid;
}

}  // namespace uadrive
