#ifndef DUALMP_MRF_HPP
#define DUALMP_MRF_HPP

#include <span>
#include <vector>

#include "dualmp/message_engine.hpp"
#include "dualmp/trace.hpp"

namespace dualmp::mrf {

struct PairwiseEdge {
  index u = -1, v = -1;   // u < v after validation
  std::vector<cost> table; // row-major, rows indexed by the lower endpoint's labels
};

/// Pairwise model: unary costs per node plus pairwise cost tables per edge.
struct PairwiseModel {
  std::vector<std::vector<cost>> unaries; // one vector per node
  std::vector<PairwiseEdge> edges;

  index node_count() const { return static_cast<index>(unaries.size()); }
  index label_count(index u) const
  {
    return static_cast<index>(unaries[static_cast<std::size_t>(u)].size());
  }
};

// Normalizes edges to u < v (transposing tables), checks shapes, rejects
// self-loops and duplicate edges.
void validate_model(PairwiseModel& model);

/// Node visiting order plus the induced incoming/outgoing incident edge sets.
struct NodeOrder {
  std::vector<index> order;    // permutation of the nodes
  std::vector<index> position; // inverse permutation
  // Incident model-edge indices of u that lead to nodes earlier/later in the order.
  std::vector<std::vector<index>> incoming, outgoing;
};

NodeOrder make_node_order(const PairwiseModel& model, std::vector<index> order);
NodeOrder identity_order(const PairwiseModel& model);

// Factor ids in the graph built below: node u -> u, edge k -> node_count + k.
index node_factor(index u);
index edge_factor(const PairwiseModel& model, index k);

// Node simplex factor per node, table factor per edge, two marginalization
// couplings per edge.
FactorGraph build_crf_factor_graph(const PairwiseModel& model);

// min_s theta(s) - theta(x) per label; the simplex factor's maximizer for a
// singleton target.
std::vector<cost> node_to_edge_message(std::span<const cost> node_costs);

// min over the whole table minus the per-row (or per-column) min-marginal.
std::vector<cost> edge_to_node_message(std::span<const cost> table, index rows, index cols,
                                       bool toward_rows);

enum class CrfScheduleKind { srmp, msd, mplp };

Schedule schedule_srmp(const PairwiseModel& model, const NodeOrder& order);
Schedule schedule_msd(const PairwiseModel& model);
Schedule schedule_mplp(const PairwiseModel& model);
Schedule make_schedule(const PairwiseModel& model, CrfScheduleKind kind, const NodeOrder& order);

// Greedy conditioned rounding along the order, interleaved with one forward
// pass on a scratch copy of the duals.
std::vector<index> round_crf(const PairwiseModel& model, const FactorGraph& fg,
                             const DualVariables& phi, const NodeOrder& order);

// Full factor-graph labeling induced by node labels (edge configs follow the
// endpoint labels, hence coupling-consistent).
Labeling crf_labeling(const PairwiseModel& model, std::span<const index> node_labels);

cost crf_labeling_cost(const PairwiseModel& model, std::span<const index> node_labels);

struct CrfSolveResult {
  std::vector<ConvergenceRecord> records;
  cost dual_bound = -infinite_cost;
  cost best_primal = infinite_cost;
  std::vector<index> best_labels;
  int iterations = 0;
};

CrfSolveResult solve_crf(const PairwiseModel& model, CrfScheduleKind kind, const NodeOrder& order,
                         const SolveOptions& options);

} // namespace dualmp::mrf

#endif
