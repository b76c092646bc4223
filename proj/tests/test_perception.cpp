#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "acceptance_checks.hpp"
#include "uadrive/perception.hpp"

using namespace uadrive;


TEST_CASE("case tags name hidden vehicles in b, ego, f1, f2 order") {
  CHECK(removed_roles(PerturbationCase::VEXV) == std::vector<Role>{Role::f1});
  CHECK(removed_roles(PerturbationCase::XEVV) == std::vector<Role>{Role::b});
  CHECK(removed_roles(PerturbationCase::VEXX) == std::vector<Role>{Role::f1, Role::f2});
  CHECK(removed_roles(PerturbationCase::XEXX) ==
        std::vector<Role>{Role::f1, Role::f2, Role::b});
  CHECK(removed_roles(PerturbationCase::VEVV).empty());
  for (auto c : kAllCases) CHECK(parse_case(case_tag(c)) == c);
  CHECK(parse_case("vexv") == PerturbationCase::VEXV);
  CHECK_THROWS_AS(parse_case("VVVV"), std::invalid_argument);
}

TEST_CASE("row lookup covers 50 m ahead and 12.5 m behind") {
  CHECK(row_for_offset(0.0) == 20);
  CHECK(row_for_offset(49.99) == 0);
  CHECK(row_for_offset(47.5) == 1);
  CHECK(row_for_offset(50.0) == -1);
  CHECK(row_for_offset(-12.49) == 24);
  CHECK(row_for_offset(-12.5) == -1);
  CHECK(row_for_offset(-0.01) == 20);
  CHECK(row_for_offset(2.5) == 19);
}

TEST_CASE("background grid has markings on the outer columns") {
  const SemanticGrid g = background_grid();
  for (int row = 0; row < kGridRows; ++row) {
    CHECK(g.at(row, 0) == CellClass::lane_marking);
    CHECK(g.at(row, 1) == CellClass::road);
    CHECK(g.at(row, 2) == CellClass::road);
    CHECK(g.at(row, 3) == CellClass::lane_marking);
  }
}

TEST_CASE("perturbed grids equal the per-vehicle mask oracle on 1000 worlds x 5 cases") {
  CHECK(checks::perturbation_mismatches(1000, 2024) == 0);
}

TEST_CASE("VEVV leaves the grid untouched and the ego is never removed") {
  WorldConfig c;
  for (std::uint64_t k = 0; k < 200; ++k) {
    const WorldState w = checks::random_world(9000 + k);
    const SemanticGrid full = render_bev(w, c);
    CHECK(apply_perturbation(full, PerturbationCase::VEVV, w) == full);
    const CellMask ego = vehicle_mask(w, Role::ego);
    for (auto pc : kAllCases) {
      const SemanticGrid g = apply_perturbation(full, pc, w);
      for (int i = 0; i < kGridCells; ++i)
        if (ego.test(i)) CHECK(g.cells[i] == CellClass::ego_vehicle);
    }
  }
}

TEST_CASE("MPC schedules cover the horizon and are reproducible") {
  const MpcSchedule s = sample_mpc_schedule(42, 7501);
  CHECK(s.total_steps() >= 7501);
  CHECK(s.total_steps() - s.segments.back().duration < 7501);
  CHECK(sample_mpc_schedule(42, 7501) == s);
  CHECK_FALSE(sample_mpc_schedule(43, 7501) == s);
  int t = 0;
  for (const auto& seg : s.segments) {
    CHECK(current_case(s, t) == seg.perturbation);
    CHECK(current_case(s, t + seg.duration - 1) == seg.perturbation);
    t += seg.duration;
  }
  CHECK_THROWS_AS(current_case(s, t), std::out_of_range);
  CHECK_THROWS_AS(current_case(s, -1), std::out_of_range);
  CHECK_THROWS_AS(sample_mpc_schedule(1, 0), std::invalid_argument);
}

TEST_CASE("grid bytes and PGM export") {
  WorldConfig c;
  const WorldState w = reset(c, 1);
  const SemanticGrid g = render_bev(w, c);
  CHECK(grid_from_bytes(grid_bytes(g)) == g);
  auto bad = grid_bytes(g);
  bad[0] = 9;
  CHECK_THROWS_AS(grid_from_bytes(bad), std::invalid_argument);

  const auto path = std::filesystem::temp_directory_path() / "uadrive_test_grid.pgm";
  write_pgm(g, path);
  std::ifstream in(path, std::ios::binary);
  std::string magic, dims, maxval;
  std::getline(in, magic);
  std::getline(in, dims);
  std::getline(in, maxval);
  CHECK(magic == "P5");
  CHECK(dims == "4 25");
  CHECK(maxval == "255");
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(body.size() == 100);
  std::filesystem::remove(path);
}
