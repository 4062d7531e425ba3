#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dcpf/grid.hpp"
#include "dcpf/io.hpp"

namespace dcpf::test {

inline std::filesystem::path repo_root() {
#ifdef DCPF_SOURCE_DIR
  return DCPF_SOURCE_DIR;
#else
  return ".";
#endif
}

inline Grid load_ieee14() { return load_grid(repo_root() / "grids" / "ieee14.json"); }

// 2 substations, one line; gen at sub 0 (slack), load at sub 1.
inline Grid two_bus_grid(double x = 0.5) {
  Grid g;
  g.name = "twobus";
  g.n_substations = 2;
  g.slack_substation = 0;
  g.lines = {{"a", 0, 1, x}};
  g.generators = {{"g0", 0, 1.0}};
  g.loads = {{"d0", 1, 1.0}};
  g.validate();
  return g;
}

// 3 substations in a path 0-1-2 with x = {0.2, 0.25}; gen at slack, loads at 1 and 2.
inline Grid three_bus_path() {
  Grid g;
  g.name = "threepath";
  g.n_substations = 3;
  g.slack_substation = 0;
  g.lines = {{"a", 0, 1, 0.2}, {"b", 1, 2, 0.25}};
  g.generators = {{"g0", 0, 2.0}};
  g.loads = {{"d0", 1, 0.4}, {"d1", 2, 0.6}};
  g.validate();
  return g;
}

// 3-substation triangle, unit reactances.
inline Grid triangle_grid() {
  Grid g;
  g.name = "triangle";
  g.n_substations = 3;
  g.slack_substation = 0;
  g.lines = {{"a", 0, 1, 1.0}, {"b", 1, 2, 1.0}, {"c", 2, 0, 1.0}};
  g.generators = {{"g0", 0, 1.5}};
  g.loads = {{"d0", 1, 0.5}, {"d1", 2, 0.5}};
  g.validate();
  return g;
}

// Small 4-substation mesh for gradient checks: square with one diagonal.
inline Grid four_bus_grid() {
  Grid g;
  g.name = "fourbus";
  g.n_substations = 4;
  g.slack_substation = 0;
  g.lines = {{"a", 0, 1, 0.3},
             {"b", 1, 2, 0.5},
             {"c", 2, 3, 0.4},
             {"d", 3, 0, 0.25},
             {"e", 0, 2, 0.6}};
  g.generators = {{"g0", 0, 1.5}, {"g1", 2, 0.8}};
  g.loads = {{"d0", 1, 0.5}, {"d1", 3, 0.6}};
  g.validate();
  return g;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("dcpf_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dcpf::test
