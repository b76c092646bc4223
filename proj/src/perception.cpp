#include "uadrive/perception.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>

#include "uadrive/observation.hpp"

namespace uadrive {

namespace {

constexpr std::array<int, 2> kLaneCols = {1, 2};

bool is_marking_col(int col) { return col == 0 || col == kGridCols - 1; }

}  // namespace

std::string_view case_tag(PerturbationCase c) {
  switch (c) {
    case PerturbationCase::VEXV: return "VEXV";
    case PerturbationCase::XEVV: return "XEVV";
    case PerturbationCase::VEXX: return "VEXX";
    case PerturbationCase::XEXX: return "XEXX";
    case PerturbationCase::VEVV: return "VEVV";
  }
  throw std::invalid_argument("unknown perturbation case");
}

PerturbationCase parse_case(std::string_view tag) {
  std::string upper(tag);
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (auto c : kAllCases) {
    if (case_tag(c) == upper) return c;
  }
  throw std::invalid_argument("unknown perturbation case '" + std::string(tag) + "'");
}

std::vector<Role> removed_roles(PerturbationCase c) {
  switch (c) {
    case PerturbationCase::VEXV: return {Role::f1};
    case PerturbationCase::XEVV: return {Role::b};
    case PerturbationCase::VEXX: return {Role::f1, Role::f2};
    case PerturbationCase::XEXX: return {Role::f1, Role::f2, Role::b};
    case PerturbationCase::VEVV: return {};
  }
  throw std::invalid_argument("unknown perturbation case");
}

int MpcSchedule::total_steps() const {
  int total = 0;
  for (const auto& s : segments) total += s.duration;
  return total;
}

SemanticGrid background_grid() {
  SemanticGrid grid;
  for (int row = 0; row < kGridRows; ++row) {
    for (int col = 0; col < kGridCols; ++col) {
      grid.at(row, col) = is_marking_col(col) ? CellClass::lane_marking
                                              : CellClass::road;
    }
  }
  return grid;
}

int row_for_offset(double rel_m) {
  if (!(rel_m < kViewAheadM) || !(rel_m > -kViewBehindM)) return -1;
  const int row = static_cast<int>(std::floor((kViewAheadM - rel_m) / kRowLengthM));
  return row >= 0 && row < kGridRows ? row : -1;
}

CellMask vehicle_mask(const WorldState& world, Role role) {
  const VehicleState& ego = world.ego();
  const VehicleState& v = world.vehicle(role);
  const double lo = v.rear() - ego.position_m;
  const double hi = v.front() - ego.position_m;
  CellMask mask;
  for (int row = 0; row < kGridRows; ++row) {
    const double row_hi = kViewAheadM - kRowLengthM * row;
    const double row_lo = row_hi - kRowLengthM;
    if (lo < row_hi && hi > row_lo) {
      for (int col : kLaneCols) mask.set(row * kGridCols + col);
    }
  }
  return mask;
}

SemanticGrid render_bev(const WorldState& world, const WorldConfig& /*config*/) {
  SemanticGrid grid = background_grid();
  for (Role role : {Role::f1, Role::f2, Role::b}) {
    const CellMask mask = vehicle_mask(world, role);
    for (int i = 0; i < kGridCells; ++i)
      if (mask.test(i)) grid.cells[i] = CellClass::other_vehicle;
  }
  const CellMask ego = vehicle_mask(world, Role::ego);
  for (int i = 0; i < kGridCells; ++i)
    if (ego.test(i)) grid.cells[i] = CellClass::ego_vehicle;
  return grid;
}

SemanticGrid apply_perturbation(const SemanticGrid& grid, PerturbationCase c,
                                const WorldState& world) {
  const std::vector<Role> removed = removed_roles(c);
  if (removed.empty()) return grid;

  CellMask hidden;
  CellMask kept = vehicle_mask(world, Role::ego);
  for (Role role : {Role::f1, Role::f2, Role::b}) {
    const bool is_removed =
        std::find(removed.begin(), removed.end(), role) != removed.end();
    (is_removed ? hidden : kept) |= vehicle_mask(world, role);
  }
  hidden &= ~kept;

  const SemanticGrid background = background_grid();
  SemanticGrid out = grid;
  for (int i = 0; i < kGridCells; ++i)
    if (hidden.test(i)) out.cells[i] = background.cells[i];
  return out;
}

MpcSchedule sample_mpc_schedule(std::uint64_t seed, int horizon) {
  if (horizon < 1) throw std::invalid_argument("sample_mpc_schedule: horizon must be >= 1");
  std::mt19937_64 rng(seed);
  MpcSchedule schedule;
  schedule.seed = seed;
  int total = 0;
  while (total < horizon) {
    MpcSegment segment;
    segment.perturbation = kAllCases[rng() % kAllCases.size()];
    segment.duration = kSegmentDurations[rng() % kSegmentDurations.size()];
    total += segment.duration;
    schedule.segments.push_back(segment);
  }
  return schedule;
}

PerturbationCase current_case(const MpcSchedule& schedule, int t) {
  if (t < 0) throw std::out_of_range("current_case: negative step");
  int start = 0;
  for (const auto& segment : schedule.segments) {
    if (t < start + segment.duration) return segment.perturbation;
    start += segment.duration;
  }
  throw std::out_of_range("current_case: step " + std::to_string(t) +
                          " beyond schedule of " + std::to_string(start) +
                          " steps");
}

std::array<std::uint8_t, kGridCells> grid_bytes(const SemanticGrid& grid) {
  std::array<std::uint8_t, kGridCells> out{};
  for (int i = 0; i < kGridCells; ++i) out[i] = static_cast<std::uint8_t>(grid.cells[i]);
  return out;
}

SemanticGrid grid_from_bytes(const std::array<std::uint8_t, kGridCells>& bytes) {
  SemanticGrid grid;
  for (int i = 0; i < kGridCells; ++i) {
    if (bytes[i] > static_cast<std::uint8_t>(CellClass::other_vehicle))
      throw std::invalid_argument("grid_from_bytes: invalid class id");
    grid.cells[i] = static_cast<CellClass>(bytes[i]);
  }
  return grid;
}

void write_pgm(const SemanticGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << kGridCols << ' ' << kGridRows << "\n255\n";
  for (CellClass c : grid.cells) out.put(static_cast<char>(grayscale(c)));
}

}  // namespace uadrive
