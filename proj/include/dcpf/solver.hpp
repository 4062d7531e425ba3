#pragma once

#include <span>
#include <vector>

#include "dcpf/grid.hpp"

namespace dcpf {

struct PhasorSolution {
  std::vector<double> theta;  // radians, theta[slack_bus] == 0 exactly
  int slack_bus = -1;
};

struct LineFlows {
  std::vector<double> p_or;  // p.u., 0 for disconnected lines
  std::vector<double> p_ex;
};

// Per-bus net injection: sum of generation minus load at each bus, with the
// slack bus overwritten so the vector sums to zero exactly.
std::vector<double> nodal_injections(const BusGraph& bg, const Grid& grid,
                                     const Injection& inj);

// Exact reference solve of Y theta = p with theta[slack] pinned to 0, via
// Cholesky on the reduced (dim-1) system. Throws SingularSystem.
PhasorSolution solve_dc(const NodalMatrix& Y, std::span<const double> p, int slack_bus);

// p_or = b (theta_o - theta_e), p_ex the negation; disconnected lines get (0, 0).
LineFlows line_flows(const PhasorSolution& sol, const BusGraph& bg);

// Everything a sample evaluation needs, built once from (grid, tau, inj).
struct SampleContext {
  BusGraph bg;
  NodalMatrix Y;
  std::vector<double> p;  // slack-balanced nodal injections
};

SampleContext make_context(const Grid& grid, const TopologyVector& tau, const Injection& inj);

// Full physical-solver pipeline for one sample; the timing unit for speed-ups.
struct SolveOutput {
  PhasorSolution sol;
  LineFlows flows;
};
SolveOutput solve_sample(const Grid& grid, const TopologyVector& tau, const Injection& inj);

}  // namespace dcpf
