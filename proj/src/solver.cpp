#include "dcpf/solver.hpp"

#include "dcpf/errors.hpp"

namespace dcpf {

std::vector<double> nodal_injections(const BusGraph& bg, const Grid& grid,
                                     const Injection& inj) {
  std::vector<double> p(bg.n_buses, 0.0);
  for (int g = 0; g < grid.n_generators(); ++g) {
    const int bus = bg.element_to_bus[TopologyVector::generator_element(grid, g)];
    p[bus] += inj.p_prod[g];
  }
  for (int d = 0; d < grid.n_loads(); ++d) {
    const int bus = bg.element_to_bus[TopologyVector::load_element(grid, d)];
    p[bus] -= inj.p_load[d];
  }
  double rest = 0.0;
  for (int i = 0; i < bg.n_buses; ++i)
    if (i != bg.slack_bus) rest += p[i];
  p[bg.slack_bus] = -rest;  // slack absorbs the imbalance
  return p;
}

PhasorSolution solve_dc(const NodalMatrix& Y, std::span<const double> p, int slack_bus) {
  if (static_cast<int>(p.size()) != Y.dim)
    throw DimensionMismatch("solve_dc: injection dimension does not match matrix");
  const int n = Y.dim;

  // reduced system with the slack row/column removed
  std::vector<int> red(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (i != slack_bus) red[i] = m++;

  DenseMatrix dense = Y.dense();
  DenseMatrix A(m, m);
  std::vector<double> b(m, 0.0);
  for (int i = 0; i < n; ++i) {
    if (i == slack_bus) continue;
    b[red[i]] = p[i];
    for (int j = 0; j < n; ++j) {
      if (j == slack_bus) continue;
      A.at(red[i], red[j]) = dense.at(i, j);
    }
  }
  std::vector<double> x = cholesky_solve(A, b);

  PhasorSolution sol;
  sol.slack_bus = slack_bus;
  sol.theta.assign(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (i != slack_bus) sol.theta[i] = x[red[i]];
  return sol;
}

LineFlows line_flows(const PhasorSolution& sol, const BusGraph& bg) {
  const int L = static_cast<int>(bg.line_bus_or.size());
  LineFlows f;
  f.p_or.assign(L, 0.0);
  f.p_ex.assign(L, 0.0);
  for (const auto& e : bg.edges) {
    // edges carry (bus_or, bus_ex, line) in origin/extremity order
    const double flow = e.susceptance * (sol.theta[e.bus_a] - sol.theta[e.bus_b]);
    f.p_or[e.line] = flow;
    f.p_ex[e.line] = -flow;
  }
  return f;
}

SampleContext make_context(const Grid& grid, const TopologyVector& tau, const Injection& inj) {
  SampleContext ctx;
  ctx.bg = apply_topology(grid, tau);
  ctx.Y = build_nodal_matrix(ctx.bg);
  ctx.p = nodal_injections(ctx.bg, grid, inj);
  return ctx;
}

SolveOutput solve_sample(const Grid& grid, const TopologyVector& tau, const Injection& inj) {
  SampleContext ctx = make_context(grid, tau, inj);
  SolveOutput out;
  out.sol = solve_dc(ctx.Y, ctx.p, ctx.bg.slack_bus);
  out.flows = line_flows(out.sol, ctx.bg);
  return out;
}

}  // namespace dcpf
