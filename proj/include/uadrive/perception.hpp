#ifndef UADRIVE_PERCEPTION_HPP_
#define UADRIVE_PERCEPTION_HPP_

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "uadrive/sim_core.hpp"

namespace uadrive {

enum class CellClass : std::uint8_t {
  road = 0,
  lane_marking = 1,
  ego_vehicle = 2,
  other_vehicle = 3,
};

// Bird's-eye window around the ego: 25 rows of 2.5 m, 20 ahead and 5
// behind. Row 0 is farthest ahead. Columns 0 and 3 are lane markings,
// columns 1 and 2 the ego lane.
inline constexpr int kGridRows = 25;
inline constexpr int kGridCols = 4;
inline constexpr int kGridCells = kGridRows * kGridCols;
inline constexpr double kRowLengthM = 2.5;
inline constexpr double kViewAheadM = 50.0;
inline constexpr double kViewBehindM = 12.5;

using CellMask = std::bitset<kGridCells>;

struct SemanticGrid {
  std::array<CellClass, kGridCells> cells{};

  CellClass at(int row, int col) const { return cells[row * kGridCols + col]; }
  CellClass& at(int row, int col) { return cells[row * kGridCols + col]; }

  friend bool operator==(const SemanticGrid&, const SemanticGrid&) = default;
};

// Listing order matches the one-hot slots of the uncertainty channel.
enum class PerturbationCase : std::uint8_t { VEXV = 0, XEVV, VEXX, XEXX, VEVV };

inline constexpr std::array<PerturbationCase, 5> kAllCases = {
    PerturbationCase::VEXV, PerturbationCase::XEVV, PerturbationCase::VEXX,
    PerturbationCase::XEXX, PerturbationCase::VEVV};

inline constexpr std::array<int, 5> kSegmentDurations = {50, 100, 150, 200, 400};

std::string_view case_tag(PerturbationCase c);
// Accepts upper or lower case tags. Throws std::invalid_argument.
PerturbationCase parse_case(std::string_view tag);

// Vehicles hidden by a case.
std::vector<Role> removed_roles(PerturbationCase c);

struct MpcSegment {
  PerturbationCase perturbation = PerturbationCase::VEVV;
  int duration = 0;

  friend bool operator==(const MpcSegment&, const MpcSegment&) = default;
};

struct MpcSchedule {
  std::vector<MpcSegment> segments;
  std::uint64_t seed = 0;

  int total_steps() const;

  friend bool operator==(const MpcSchedule&, const MpcSchedule&) = default;
};

// Static scene (no vehicles).
SemanticGrid background_grid();

// Row covering the longitudinal offset `rel_m` from the ego center, or -1
// when the offset lies outside the window.
int row_for_offset(double rel_m);

// Cells painted by one vehicle in the current world (ego included).
CellMask vehicle_mask(const WorldState& world, Role role);

SemanticGrid render_bev(const WorldState& world, const WorldConfig& config);

SemanticGrid apply_perturbation(const SemanticGrid& grid, PerturbationCase c,
                                const WorldState& world);

MpcSchedule sample_mpc_schedule(std::uint64_t seed, int horizon);

// Case active at step t. Throws std::out_of_range past the schedule end.
PerturbationCase current_case(const MpcSchedule& schedule, int t);

// One byte per cell, row-major.
std::array<std::uint8_t, kGridCells> grid_bytes(const SemanticGrid& grid);
SemanticGrid grid_from_bytes(const std::array<std::uint8_t, kGridCells>& bytes);

// Binary PGM (P5), 4 wide by 25 tall, gray palette of the observation.
void write_pgm(const SemanticGrid& grid, const std::filesystem::path& path);

}  // namespace uadrive

#endif  // UADRIVE_PERCEPTION_HPP_
