#ifndef DUALMP_GRAPH_MATCHING_HPP
#define DUALMP_GRAPH_MATCHING_HPP

#include <span>
#include <vector>

#include "dualmp/mrf.hpp"

namespace dualmp::gm {

constexpr index unassigned = -1;

/// CRF backbone plus one factor per universe label enforcing at-most-once
/// label use via a dummy non-assignment configuration.
struct MatchingModel {
  mrf::PairwiseModel backbone;             // label index = position in candidates[u]
  index universe_size = 0;
  std::vector<std::vector<index>> candidates; // X_u, ascending universe labels
  std::vector<std::vector<cost>> label_costs; // per label: |X_s|+1 zeros, dummy last
};

void validate_model(MatchingModel& model);

// Nodes that may take label s, ascending; the dummy occupies the last
// coordinate of the label factor.
std::vector<index> label_candidates(const MatchingModel& model, index label);

index node_factor(index u);
index edge_factor(const MatchingModel& model, index k);
index label_factor(const MatchingModel& model, index label);

// CRF factors and couplings plus one scalar coupling per (node, candidate
// label) pair.
FactorGraph build_gm_factor_graph(const MatchingModel& model);

// min over the other configurations minus the cost of `coord`; the maximal
// admissible scalar message on a single-coordinate coupling.
cost label_factor_message(std::span<const cost> label_costs, index coord);

// Same, addressed by (label, node); throws when the node is not a candidate.
cost label_factor_message(const MatchingModel& model, index label, index node,
                          std::span<const cost> label_costs);

Schedule schedule_amp(const MatchingModel& model, const mrf::NodeOrder& order);

// Greedy sequential assignment over reparametrized costs, skipping labels
// already used; nodes without a remaining candidate stay unassigned.
std::vector<index> round_gm(const MatchingModel& model, const FactorGraph& fg,
                            const DualVariables& phi, const mrf::NodeOrder& order);

// True iff all assigned labels are pairwise distinct.
bool verify_matching(std::span<const index> assignment);

// Cost of a complete assignment; infinite when some node is unassigned.
cost assignment_cost(const MatchingModel& model, std::span<const index> assignment);

// Factor-graph labeling induced by a feasible assignment.
Labeling gm_labeling(const MatchingModel& model, std::span<const index> assignment);

struct GmSolveResult {
  std::vector<ConvergenceRecord> records;
  cost dual_bound = -infinite_cost;
  cost best_primal = infinite_cost;
  std::vector<index> best_assignment;
  int iterations = 0;
};

GmSolveResult solve_gm(const MatchingModel& model, const mrf::NodeOrder& order,
                       const SolveOptions& options);

} // namespace dualmp::gm

#endif
