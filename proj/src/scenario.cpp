#include "dcpf/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include "dcpf/errors.hpp"

namespace dcpf {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Ood: return "ood";
  }
  return "?";
}

std::string to_string(DisconnectionRule r) {
  switch (r) {
    case DisconnectionRule::AtMostOne: return "at_most_one";
    case DisconnectionRule::ExactlyOne: return "exactly_one";
    case DisconnectionRule::ExactlyTwo: return "exactly_two";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  if (s == "ood") return Split::Ood;
  throw ConfigError("unknown split '" + s + "'");
}

DisconnectionRule rule_from_string(const std::string& s) {
  if (s == "at_most_one") return DisconnectionRule::AtMostOne;
  if (s == "exactly_one") return DisconnectionRule::ExactlyOne;
  if (s == "exactly_two") return DisconnectionRule::ExactlyTwo;
  throw ConfigError("unknown disconnection rule '" + s + "'");
}

DisconnectionRule rule_for_split(Split s) {
  switch (s) {
    case Split::Train:
    case Split::Val: return DisconnectionRule::AtMostOne;
    case Split::Test: return DisconnectionRule::ExactlyOne;
    case Split::Ood: return DisconnectionRule::ExactlyTwo;
  }
  throw ConfigError("unknown split");
}

void ScenarioConfig::validate() const {
  if (n_samples < 1) throw ConfigError("scenario: n_samples must be >= 1");
  if (p_unchanged < 0.0 || p_unchanged > 1.0)
    throw ConfigError("scenario: p_unchanged must lie in [0, 1]");
  if (max_reconfigured_substations < 1)
    throw ConfigError("scenario: max_reconfigured_substations must be >= 1");
  if (load_scale_lo > load_scale_hi || load_scale_lo < 0.0)
    throw ConfigError("scenario: load_scale range invalid");
}

namespace {

bool topology_is_valid(const Grid& grid, const TopologyVector& tau) {
  try {
    apply_topology(grid, tau);
    return true;
  } catch (const IslandedGrid&) {
    return false;
  }
}

// elements attached to one substation, in canonical element order
std::vector<int> substation_elements(const Grid& grid, int sub) {
  std::vector<int> elems;
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (grid.lines[l].sub_or == sub) elems.push_back(TopologyVector::line_or_element(l));
    if (grid.lines[l].sub_ex == sub) elems.push_back(TopologyVector::line_ex_element(grid, l));
  }
  for (int g = 0; g < grid.n_generators(); ++g)
    if (grid.generators[g].substation == sub)
      elems.push_back(TopologyVector::generator_element(grid, g));
  for (int d = 0; d < grid.n_loads(); ++d)
    if (grid.loads[d].substation == sub) elems.push_back(TopologyVector::load_element(grid, d));
  return elems;
}

}  // namespace

TopologyVector sample_reference_topology(const Grid& grid, Rng& rng,
                                         const ScenarioConfig& config) {
  const TopologyVector base = TopologyVector::default_for(grid);
  if (rng.bernoulli(config.p_unchanged)) return base;

  for (int attempt = 0; attempt < kTopologyRetryBudget; ++attempt) {
    TopologyVector tau = base;
    const int n_subs =
        1 + static_cast<int>(rng.uniform_int(config.max_reconfigured_substations));
    // distinct substations via rejection; K is small
    std::vector<int> chosen;
    while (static_cast<int>(chosen.size()) < n_subs) {
      const int sub = static_cast<int>(rng.uniform_int(grid.n_substations));
      bool dup = false;
      for (int c : chosen) dup |= (c == sub);
      if (!dup) chosen.push_back(sub);
    }
    for (int sub : chosen)
      for (int e : substation_elements(grid, sub))
        tau.element_bus[e] = rng.bernoulli(0.5) ? Busbar::Two : Busbar::One;
    // a draw that leaves everything on busbar 1 is not a reconfiguration;
    // redraw so the default topology appears with probability p_unchanged exactly
    if (tau == base) continue;
    if (topology_is_valid(grid, tau)) return tau;
  }
  throw RetriesExhausted("reference topology sampling kept islanding the grid (" +
                         std::to_string(kTopologyRetryBudget) + " attempts)");
}

TopologyVector overlay_disconnections(const Grid& grid, const TopologyVector& tau, Rng& rng,
                                      DisconnectionRule rule) {
  if (tau.n_disconnected() != 0)
    throw DataError("overlay_disconnections expects a fully connected topology");
  const int L = grid.n_lines();

  int want = 0;
  switch (rule) {
    case DisconnectionRule::AtMostOne: want = rng.bernoulli(0.5) ? 1 : 0; break;
    case DisconnectionRule::ExactlyOne: want = 1; break;
    case DisconnectionRule::ExactlyTwo: want = 2; break;
  }
  if (want == 0) return tau;

  for (int attempt = 0; attempt < kTopologyRetryBudget; ++attempt) {
    TopologyVector out = tau;
    if (want == 1) {
      out.line_status[rng.uniform_int(L)] = LineStatus::Disconnected;
    } else {
      const int a = static_cast<int>(rng.uniform_int(L));
      int b = static_cast<int>(rng.uniform_int(L - 1));
      if (b >= a) ++b;  // uniform unordered pair of distinct lines
      out.line_status[a] = LineStatus::Disconnected;
      out.line_status[b] = LineStatus::Disconnected;
    }
    if (topology_is_valid(grid, out)) return out;
  }
  throw RetriesExhausted("line disconnection sampling kept islanding the grid (" +
                         std::to_string(kTopologyRetryBudget) + " attempts)");
}

Injection sample_injection(const Grid& grid, Rng& rng, const ScenarioConfig& config) {
  Injection inj;
  inj.p_load.resize(grid.n_loads());
  double total_load = 0.0;
  for (int d = 0; d < grid.n_loads(); ++d) {
    inj.p_load[d] =
        grid.loads[d].p_nominal * rng.uniform(config.load_scale_lo, config.load_scale_hi);
    total_load += inj.p_load[d];
  }

  double total_cap = 0.0;
  for (const auto& g : grid.generators) total_cap += g.p_nominal;

  inj.p_prod.assign(grid.n_generators(), 0.0);
  int slack_gen = -1;
  double dispatched = 0.0;
  for (int g = 0; g < grid.n_generators(); ++g) {
    if (slack_gen < 0 && grid.generators[g].substation == grid.slack_substation) {
      slack_gen = g;  // first generator at the slack substation balances
      continue;
    }
    inj.p_prod[g] = total_load * grid.generators[g].p_nominal / total_cap;
    dispatched += inj.p_prod[g];
  }
  if (slack_gen < 0)
    throw DataError("grid '" + grid.name + "' has no generator at the slack substation");
  inj.p_prod[slack_gen] = total_load - dispatched;  // exact balance
  return inj;
}

Sample make_sample(const Grid& grid, const ScenarioConfig& config, std::uint64_t index) {
  Rng rng = Rng::stream(config.seed, index);
  TopologyVector tau = sample_reference_topology(grid, rng, config);
  tau = overlay_disconnections(grid, tau, rng, config.disconnection_rule);
  Injection inj = sample_injection(grid, rng, config);

  SampleContext ctx = make_context(grid, tau, inj);
  PhasorSolution sol = solve_dc(ctx.Y, ctx.p, ctx.bg.slack_bus);

  Sample s;
  s.tau = std::move(tau);
  s.inj = std::move(inj);
  s.theta_bus_slots.assign(grid.n_slots(), 0.0);
  for (int b = 0; b < ctx.bg.n_buses; ++b) s.theta_bus_slots[ctx.bg.bus_slot[b]] = sol.theta[b];
  s.theta_or.assign(grid.n_lines(), 0.0);
  s.theta_ex.assign(grid.n_lines(), 0.0);
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (ctx.bg.line_bus_or[l] < 0) continue;  // disconnected: stays 0 by convention
    s.theta_or[l] = sol.theta[ctx.bg.line_bus_or[l]];
    s.theta_ex[l] = sol.theta[ctx.bg.line_bus_ex[l]];
  }
  s.flows = line_flows(sol, ctx.bg);
  return s;
}

Dataset generate_dataset(const Grid& grid, Split split, const ScenarioConfig& config,
                         ExecPolicy policy) {
  config.validate();
  if (config.disconnection_rule != rule_for_split(split))
    throw ConfigError("split '" + to_string(split) + "' requires disconnection rule '" +
                      to_string(rule_for_split(split)) + "'");

  Dataset ds;
  ds.split = split;
  ds.manifest.grid_name = grid.name;
  ds.manifest.split = split;
  ds.manifest.config = config;
  ds.samples.resize(config.n_samples);

  // per-sample streams make the loop order-independent
  std::vector<std::string> failures(config.n_samples);
  parallel_for(config.n_samples, policy, [&](int i) {
    try {
      ds.samples[i] = make_sample(grid, config, static_cast<std::uint64_t>(i));
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  });
  for (int i = 0; i < config.n_samples; ++i)
    if (!failures[i].empty())
      throw RetriesExhausted("sample " + std::to_string(i) + ": " + failures[i]);
  return ds;
}

}  // namespace dcpf
