#ifndef DUALMP_MULTICUT_HPP
#define DUALMP_MULTICUT_HPP

#include <array>
#include <set>
#include <span>
#include <vector>

#include "dualmp/message_engine.hpp"
#include "dualmp/trace.hpp"

namespace dualmp::mc {

struct McEdge {
  index u = -1, v = -1; // u < v after validation
  cost weight = 0;
  bool auxiliary = false; // chordalization edges, weight exactly 0
};

struct MulticutInstance {
  index num_vertices = 0;
  std::vector<McEdge> edges;

  index find_edge(index u, index v) const; // -1 when absent
};

void validate_instance(const MulticutInstance& instance);

/// Vertex triple (ascending) whose three edges form a triangle; the cycle
/// factor's coordinates follow the order (uv, uw, vw).
using Triangle = std::array<index, 3>;

std::array<index, 3> triangle_edge_ids(const MulticutInstance& instance, const Triangle& t);

index edge_factor(index e);
index cycle_factor(const MulticutInstance& instance, index c);

// One 0/1 factor per edge with cost vector (theta_e), one cycle factor per
// triangle with zero base costs, scalar couplings.
FactorGraph build_multicut_factor_graph(const MulticutInstance& instance,
                                        const std::vector<Triangle>& cycles);

// Minimum over the five feasible configurations; ties to the first in the
// listed order. Returns the configuration index into that order.
struct CycleMin {
  std::size_t config = 0;
  std::array<std::uint8_t, 3> pattern{};
  cost value = 0;
};
CycleMin cycle_min_oracle(const std::array<cost, 3>& costs);

// Min over configurations cutting `coord` minus min over those not cutting
// it, negated: the maximal admissible scalar message toward the edge factor.
cost cycle_to_edge_message(const std::array<cost, 3>& costs, index coord);

// The edge factor always forwards its whole reparametrized cost.
cost cut_edge_message(cost reparametrized_edge_cost);

// All vertex triples whose edges are present.
std::vector<Triangle> enumerate_triangles(const MulticutInstance& instance);

// Adds zero-weight auxiliary edges so that cycles mixing attractive and
// repulsive reparametrized edges decompose into triangles. Returns the number
// of added edges.
int chordal_completion(MulticutInstance& instance, std::span<const cost> edge_costs);

// Guaranteed bound gain of activating triangle c: cycle-consistent minimum of
// the current reparametrized edge costs minus the sum of independent per-edge
// minima.
cost triangle_bound_gain(const MulticutInstance& instance, std::span<const cost> edge_costs,
                         const Triangle& t);

// Up to `budget` inactive triangles with positive guaranteed gain, best gain
// first, ties in lexicographic vertex order.
std::vector<Triangle> separate_triangles(const MulticutInstance& instance,
                                         std::span<const cost> edge_costs,
                                         const std::set<Triangle>& active, index budget);

// Edge factors receive from all containing cycles and send singleton blocks
// back with uniform weight 1/(number of containing cycles).
Schedule schedule_multicut(const MulticutInstance& instance, const FactorGraph& fg);

/// Component id per vertex.
using GraphPartition = std::vector<index>;

// Local search over components: greedy merges and single-vertex moves,
// accepting only strict decreases of the cut cost under `edge_costs`.
GraphPartition round_multicut_kl(const MulticutInstance& instance, std::span<const cost> edge_costs);

cost multicut_cost(const MulticutInstance& instance, const GraphPartition& partition);
cost partition_cut_cost(const MulticutInstance& instance, std::span<const cost> edge_costs,
                        const GraphPartition& partition);

// Induced cut indicator per edge: 1 when the endpoints lie in different
// components.
std::vector<std::uint8_t> partition_cut_vector(const MulticutInstance& instance,
                                               const GraphPartition& partition);

struct McSolveResult {
  std::vector<ConvergenceRecord> records;
  cost dual_bound = -infinite_cost;
  cost best_primal = infinite_cost;
  GraphPartition best_partition;
  int iterations = 0;
  int cycles_added = 0;
};

// Message passing alternated with cutting-plane triangle activation and
// periodic rounding.
McSolveResult solve_multicut(const MulticutInstance& instance, const SolveOptions& options);

// Reparametrized costs of the edge factors of `fg` (ids 0..|E|-1).
std::vector<cost> reparametrized_edge_costs(const MulticutInstance& instance, const FactorGraph& fg,
                                            const DualVariables& phi);

} // namespace dualmp::mc

#endif
