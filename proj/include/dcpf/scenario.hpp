#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcpf/grid.hpp"
#include "dcpf/parallel.hpp"
#include "dcpf/rng.hpp"
#include "dcpf/solver.hpp"

namespace dcpf {

enum class DisconnectionRule { AtMostOne, ExactlyOne, ExactlyTwo };
enum class Split { Train, Val, Test, Ood };

std::string to_string(Split s);
std::string to_string(DisconnectionRule r);
Split split_from_string(const std::string& s);
DisconnectionRule rule_from_string(const std::string& s);

// The split <-> rule contract: Train/Val draw at most one disconnection,
// Test exactly one, Ood exactly two.
DisconnectionRule rule_for_split(Split s);

struct ScenarioConfig {
  int n_samples = 1000;
  double p_unchanged = 0.3;  // probability of the untouched default topology
  int max_reconfigured_substations = 2;
  DisconnectionRule disconnection_rule = DisconnectionRule::AtMostOne;
  double load_scale_lo = 0.8;
  double load_scale_hi = 1.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  TopologyVector tau;
  Injection inj;
  std::vector<double> theta_bus_slots;  // 2K wide, zeros at non-energized slots
  std::vector<double> theta_or;         // per line; 0 for disconnected lines
  std::vector<double> theta_ex;
  LineFlows flows;
};

struct DatasetManifest {
  std::string grid_name;
  Split split = Split::Train;
  ScenarioConfig config;
  std::string generator_version = "1";
};

struct Dataset {
  Split split = Split::Train;
  std::vector<Sample> samples;
  DatasetManifest manifest;

  int size() const { return static_cast<int>(samples.size()); }
};

inline constexpr int kTopologyRetryBudget = 100;

// With probability p_unchanged the default topology; otherwise 1..max
// substations are picked and each of their elements lands on busbar 1 or 2
// with probability 1/2. Draws that island the grid are retried from the same
// stream; RetriesExhausted after the budget.
TopologyVector sample_reference_topology(const Grid& grid, Rng& rng,
                                         const ScenarioConfig& config);

// Applies the split's disconnection rule on top of a fully-connected tau.
// Only the line choice is redrawn when a draw islands the grid.
TopologyVector overlay_disconnections(const Grid& grid, const TopologyVector& tau, Rng& rng,
                                      DisconnectionRule rule);

// Loads scale around nominal; non-slack generators take capacity-proportional
// shares of the total load and the slack generator gets the exact remainder.
Injection sample_injection(const Grid& grid, Rng& rng, const ScenarioConfig& config);

// One sample from its own derived stream (seed, index); deterministic
// regardless of generation order.
Sample make_sample(const Grid& grid, const ScenarioConfig& config, std::uint64_t index);

Dataset generate_dataset(const Grid& grid, Split split, const ScenarioConfig& config,
                         ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace dcpf
