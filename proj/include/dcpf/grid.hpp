#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcpf/linalg.hpp"

namespace dcpf {

enum class Busbar : int { One = 0, Two = 1 };
enum class LineStatus : int { Disconnected = 0, Connected = 1 };

struct Line {
  std::string id;
  int sub_or = -1;
  int sub_ex = -1;
  double x = 0.0;  // reactance, p.u., > 0
};

// Generator or load attached to a substation. p_nominal drives injection
// sampling: loads scale around it, generators dispatch proportionally to it.
struct GridUnit {
  std::string id;
  int substation = -1;
  double p_nominal = 0.0;
};

// Static grid description. Immutable after load; shared read-only across
// parallel workers.
struct Grid {
  std::string name;
  int n_substations = 0;
  int slack_substation = 0;
  std::vector<Line> lines;
  std::vector<GridUnit> generators;
  std::vector<GridUnit> loads;

  int n_lines() const { return static_cast<int>(lines.size()); }
  int n_generators() const { return static_cast<int>(generators.size()); }
  int n_loads() const { return static_cast<int>(loads.size()); }
  // line origins, line extremities, generators, loads
  int n_elements() const { return 2 * n_lines() + n_generators() + n_loads(); }
  // two potential buses per substation
  int n_slots() const { return 2 * n_substations; }

  // Throws DataError on invalid references, nonpositive reactances, or a base
  // graph that is not one connected component.
  void validate() const;
};

// Per-sample busbar assignment and line status. Element order is fixed:
// [line origin ends (L)][line extremity ends (L)][generators][loads].
struct TopologyVector {
  std::vector<Busbar> element_bus;      // 2L + G + D
  std::vector<LineStatus> line_status;  // L

  static TopologyVector default_for(const Grid& grid);

  static int line_or_element(int line) { return line; }
  static int line_ex_element(const Grid& g, int line) { return g.n_lines() + line; }
  static int generator_element(const Grid& g, int gen) { return 2 * g.n_lines() + gen; }
  static int load_element(const Grid& g, int load) {
    return 2 * g.n_lines() + g.n_generators() + load;
  }

  int n_disconnected() const;
  bool operator==(const TopologyVector&) const = default;
};

struct BusGraphEdge {
  int bus_a = -1;
  int bus_b = -1;
  int line = -1;
  double susceptance = 0.0;  // b = 1/x
};

// The energized electrical graph induced by (Grid, TopologyVector). Bus
// indices are compact [0, n_buses); each bus also carries its global slot
// id = busbar * K + substation for fixed-width storage across samples.
struct BusGraph {
  int n_buses = 0;
  int slack_bus = -1;
  std::vector<int> element_to_bus;  // -1 for the ends of disconnected lines
  std::vector<BusGraphEdge> edges;
  std::vector<int> bus_slot;  // per bus, strictly increasing
  int n_slots = 0;            // 2K
  std::vector<int> line_bus_or, line_bus_ex;  // per line; -1 when disconnected
};

// Symmetric bus-level susceptance matrix: y_ii = sum of incident b on the
// diagonal, y_ij = -b_ij off-diagonal, zero row sums. Stored sparse (diagonal
// plus strictly-upper entries); dense() materializes for direct solves.
struct NodalMatrix {
  struct OffDiag {
    int i = -1;   // i < j
    int j = -1;
    double y = 0.0;  // negative: -sum of parallel susceptances
  };

  int dim = 0;
  std::vector<double> diag;
  std::vector<OffDiag> off;

  double at(int i, int j) const;
  DenseMatrix dense() const;
  std::vector<double> row_sums() const;
  // y = Y * theta
  void multiply(std::span<const double> theta, std::span<double> out) const;
};

struct Injection {
  std::vector<double> p_prod;  // per generator, p.u., >= 0
  std::vector<double> p_load;  // per load, p.u., >= 0
};

// Applies busbar assignments and line statuses. A busbar with no assigned
// element is not an electrical node. Throws IslandedGrid when the energized
// graph is not one connected component containing the slack substation's
// busbar-1 bus.
BusGraph apply_topology(const Grid& grid, const TopologyVector& tau);

// Laplacian assembly; parallel edges between the same bus pair are summed.
NodalMatrix build_nodal_matrix(const BusGraph& bg);

// Flat model input: [p_prod | p_load | element_bus as 0/1 | line_status as 1/0].
// Layout is identical for every sample of a given grid.
std::vector<double> encode_features(const Grid& grid, const TopologyVector& tau,
                                    const Injection& inj);
int feature_length(const Grid& grid);

}  // namespace dcpf
