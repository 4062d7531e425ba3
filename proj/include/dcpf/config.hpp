#pragma once

#include <map>

#include "dcpf/io.hpp"

namespace dcpf {

struct BenchConfig {
  int n_runs = 3;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int timing_repeats = 5;
  std::vector<int> train_sizes;  // non-empty enables the low-data sweep
  PhysicsThresholds thresholds;
};

// One document drives every command; defaults are materialized on load and the
// resolved config is persisted next to whatever a command produces.
struct RunConfig {
  std::string grid_path = "grids/ieee14.json";
  std::string output_dir = "out";
  bool deterministic = false;
  std::map<Split, ScenarioConfig> scenario;
  std::map<ModelKind, TrainConfig> train;
  MpConfig mp;
  BenchConfig bench;

  static RunConfig defaults();

  ExecPolicy policy() const {
    return deterministic ? ExecPolicy::Serial : ExecPolicy::Parallel;
  }
};

json to_json(const BenchConfig& c);
BenchConfig bench_config_from_json(const json& j, const BenchConfig& defaults);

json to_json(const RunConfig& c);
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace dcpf
