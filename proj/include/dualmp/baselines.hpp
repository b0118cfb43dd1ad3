#ifndef DUALMP_BASELINES_HPP
#define DUALMP_BASELINES_HPP

#include <vector>

#include "dualmp/factor_graph.hpp"
#include "dualmp/graph_matching.hpp"
#include "dualmp/multicut.hpp"

namespace dualmp {

struct StepRule {
  enum class Kind { constant, diminishing } kind = Kind::diminishing;
  double parameter = 1.0; // constant step, or c in c/t

  double step(int t) const
  {
    return kind == Kind::constant ? parameter : parameter / static_cast<double>(t);
  }
};

struct SubgradientResult {
  cost best_dual = -infinite_cost;
  DualVariables phi;
  std::vector<cost> best_trace; // running best after each step, non-decreasing
};

// Projected dual ascent along the coupling disagreement of the current
// per-factor minimizers; all edges updated synchronously per step. The
// iterate values are not monotone, so the best bound seen is tracked.
SubgradientResult subgradient_solve(const FactorGraph& fg, int steps, const StepRule& rule);

struct IlpResult {
  bool feasible = false;
  Labeling labeling;
  cost value = infinite_cost;
};

// Exhaustive search over per-factor configurations, pruning partial products
// that already violate a coupling. Throws when more than `work_cap`
// enumeration nodes would be visited.
IlpResult brute_force_ilp(const FactorGraph& fg, std::size_t work_cap = 10'000'000);

struct MulticutOptimum {
  mc::GraphPartition partition;
  cost value = infinite_cost;
};

// All set partitions of the vertices; |V| <= 10.
MulticutOptimum brute_force_multicut(const mc::MulticutInstance& instance);

struct MatchingOptimum {
  bool feasible = false;
  std::vector<index> assignment;
  cost value = infinite_cost;
};

// All injective complete assignments; <= 8 nodes.
MatchingOptimum brute_force_matching(const gm::MatchingModel& model);

} // namespace dualmp

#endif
