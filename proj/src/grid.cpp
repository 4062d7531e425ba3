#include "dcpf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dcpf/errors.hpp"

namespace dcpf {

void Grid::validate() const {
  if (n_substations < 2) throw DataError("grid '" + name + "': needs at least 2 substations");
  auto check_sub = [&](int sub, const std::string& what) {
    if (sub < 0 || sub >= n_substations)
      throw DataError("grid '" + name + "': " + what + " references invalid substation " +
                      std::to_string(sub));
  };
  check_sub(slack_substation, "slack");
  for (const auto& ln : lines) {
    check_sub(ln.sub_or, "line " + ln.id);
    check_sub(ln.sub_ex, "line " + ln.id);
    if (ln.sub_or == ln.sub_ex)
      throw DataError("grid '" + name + "': line " + ln.id + " connects a substation to itself");
    if (!(ln.x > 0.0) || !std::isfinite(ln.x))
      throw DataError("grid '" + name + "': line " + ln.id + " has nonpositive reactance");
  }
  for (const auto& g : generators) check_sub(g.substation, "generator " + g.id);
  for (const auto& d : loads) check_sub(d.substation, "load " + d.id);

  // base graph (all lines in service) must be one component
  std::vector<std::vector<int>> adj(n_substations);
  for (const auto& ln : lines) {
    adj[ln.sub_or].push_back(ln.sub_ex);
    adj[ln.sub_ex].push_back(ln.sub_or);
  }
  std::vector<char> seen(n_substations, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  if (count != n_substations)
    throw DataError("grid '" + name + "': base graph is not connected");
}

TopologyVector TopologyVector::default_for(const Grid& grid) {
  TopologyVector tau;
  tau.element_bus.assign(grid.n_elements(), Busbar::One);
  tau.line_status.assign(grid.n_lines(), LineStatus::Connected);
  return tau;
}

int TopologyVector::n_disconnected() const {
  return static_cast<int>(
      std::count(line_status.begin(), line_status.end(), LineStatus::Disconnected));
}

namespace {

void check_tau_dims(const Grid& grid, const TopologyVector& tau) {
  if (static_cast<int>(tau.element_bus.size()) != grid.n_elements() ||
      static_cast<int>(tau.line_status.size()) != grid.n_lines())
    throw DimensionMismatch("topology vector dimensions do not match grid");
}

}  // namespace

BusGraph apply_topology(const Grid& grid, const TopologyVector& tau) {
  check_tau_dims(grid, tau);
  const int K = grid.n_substations;
  const int L = grid.n_lines();

  // slot = busbar * K + substation; a slot becomes a bus once an element lands on it
  std::vector<int> slot_bus(2 * K, -1);
  auto slot_of = [&](int sub, Busbar b) { return static_cast<int>(b) * K + sub; };

  BusGraph bg;
  bg.n_slots = 2 * K;
  bg.element_to_bus.assign(grid.n_elements(), -1);

  std::vector<int> element_slot(grid.n_elements(), -1);
  for (int l = 0; l < L; ++l) {
    if (tau.line_status[l] == LineStatus::Disconnected) continue;
    const int eo = TopologyVector::line_or_element(l);
    const int ee = TopologyVector::line_ex_element(grid, l);
    element_slot[eo] = slot_of(grid.lines[l].sub_or, tau.element_bus[eo]);
    element_slot[ee] = slot_of(grid.lines[l].sub_ex, tau.element_bus[ee]);
  }
  for (int g = 0; g < grid.n_generators(); ++g) {
    const int e = TopologyVector::generator_element(grid, g);
    element_slot[e] = slot_of(grid.generators[g].substation, tau.element_bus[e]);
  }
  for (int d = 0; d < grid.n_loads(); ++d) {
    const int e = TopologyVector::load_element(grid, d);
    element_slot[e] = slot_of(grid.loads[d].substation, tau.element_bus[e]);
  }

  for (int e = 0; e < grid.n_elements(); ++e)
    if (element_slot[e] >= 0) slot_bus[element_slot[e]] = 0;  // mark occupied

  // compact bus ids in slot order
  for (int s = 0; s < 2 * K; ++s) {
    if (slot_bus[s] == 0) {
      slot_bus[s] = bg.n_buses++;
      bg.bus_slot.push_back(s);
    } else {
      slot_bus[s] = -1;
    }
  }
  for (int e = 0; e < grid.n_elements(); ++e)
    if (element_slot[e] >= 0) bg.element_to_bus[e] = slot_bus[element_slot[e]];

  const int slack_slot = slot_of(grid.slack_substation, Busbar::One);
  bg.slack_bus = slot_bus[slack_slot];
  if (bg.slack_bus < 0)
    throw IslandedGrid("slack substation's busbar-1 hosts no element; no slack bus exists");

  bg.line_bus_or.assign(L, -1);
  bg.line_bus_ex.assign(L, -1);
  for (int l = 0; l < L; ++l) {
    if (tau.line_status[l] == LineStatus::Disconnected) continue;
    const int bo = bg.element_to_bus[TopologyVector::line_or_element(l)];
    const int be = bg.element_to_bus[TopologyVector::line_ex_element(grid, l)];
    bg.line_bus_or[l] = bo;
    bg.line_bus_ex[l] = be;
    bg.edges.push_back({bo, be, l, 1.0 / grid.lines[l].x});
  }

  // connectivity from slack over energized edges
  std::vector<std::vector<int>> adj(bg.n_buses);
  for (const auto& e : bg.edges) {
    adj[e.bus_a].push_back(e.bus_b);
    adj[e.bus_b].push_back(e.bus_a);
  }
  std::vector<char> seen(bg.n_buses, 0);
  std::vector<int> stack{bg.slack_bus};
  seen[bg.slack_bus] = 1;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  if (count != bg.n_buses)
    throw IslandedGrid("energized graph is not one connected component containing the slack bus");

  return bg;
}

NodalMatrix build_nodal_matrix(const BusGraph& bg) {
  NodalMatrix y;
  y.dim = bg.n_buses;
  y.diag.assign(bg.n_buses, 0.0);

  std::map<std::pair<int, int>, double> offsum;  // (i<j) -> summed b
  for (const auto& e : bg.edges) {
    const int i = std::min(e.bus_a, e.bus_b);
    const int j = std::max(e.bus_a, e.bus_b);
    offsum[{i, j}] += e.susceptance;
    y.diag[e.bus_a] += e.susceptance;
    y.diag[e.bus_b] += e.susceptance;
  }
  y.off.reserve(offsum.size());
  for (const auto& [key, b] : offsum) y.off.push_back({key.first, key.second, -b});
  return y;
}

double NodalMatrix::at(int i, int j) const {
  if (i == j) return diag[i];
  const int a = std::min(i, j), b = std::max(i, j);
  for (const auto& e : off)
    if (e.i == a && e.j == b) return e.y;
  return 0.0;
}

DenseMatrix NodalMatrix::dense() const {
  DenseMatrix m(dim, dim);
  for (int i = 0; i < dim; ++i) m.at(i, i) = diag[i];
  for (const auto& e : off) {
    m.at(e.i, e.j) = e.y;
    m.at(e.j, e.i) = e.y;
  }
  return m;
}

std::vector<double> NodalMatrix::row_sums() const {
  std::vector<double> s(diag);
  for (const auto& e : off) {
    s[e.i] += e.y;
    s[e.j] += e.y;
  }
  return s;
}

void NodalMatrix::multiply(std::span<const double> theta, std::span<double> out) const {
  for (int i = 0; i < dim; ++i) out[i] = diag[i] * theta[i];
  for (const auto& e : off) {
    out[e.i] += e.y * theta[e.j];
    out[e.j] += e.y * theta[e.i];
  }
}

int feature_length(const Grid& grid) {
  return grid.n_generators() + grid.n_loads() + grid.n_elements() + grid.n_lines();
}

std::vector<double> encode_features(const Grid& grid, const TopologyVector& tau,
                                    const Injection& inj) {
  check_tau_dims(grid, tau);
  if (static_cast<int>(inj.p_prod.size()) != grid.n_generators() ||
      static_cast<int>(inj.p_load.size()) != grid.n_loads())
    throw DimensionMismatch("injection dimensions do not match grid");

  std::vector<double> x;
  x.reserve(feature_length(grid));
  x.insert(x.end(), inj.p_prod.begin(), inj.p_prod.end());
  x.insert(x.end(), inj.p_load.begin(), inj.p_load.end());
  for (Busbar b : tau.element_bus) x.push_back(b == Busbar::Two ? 1.0 : 0.0);
  for (LineStatus s : tau.line_status) x.push_back(s == LineStatus::Connected ? 1.0 : 0.0);
  return x;
}

}  // namespace dcpf
