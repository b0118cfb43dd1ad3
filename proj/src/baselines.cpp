#include "dualmp/baselines.hpp"

#include <algorithm>
#include <functional>

#include "dualmp/message_engine.hpp"

namespace dualmp {

SubgradientResult subgradient_solve(const FactorGraph& fg, int steps, const StepRule& rule)
{
  if (steps < 0)
    throw solver_error("subgradient step count must be nonnegative");
  if (rule.parameter <= 0)
    throw solver_error("step rule parameter must be positive");

  SubgradientResult result;
  result.phi = DualVariables(fg);
  result.best_dual = dual_lower_bound(fg, result.phi);

  const index nf = static_cast<index>(fg.factor_count());
  std::vector<std::size_t> minimizer(fg.factor_count());
  for (int t = 1; t <= steps; ++t) {
    for (index i = 0; i < nf; ++i)
      minimizer[static_cast<std::size_t>(i)] = min_oracle(fg, result.phi, i).config;

    const double step = rule.step(t);
    for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e) {
      const auto& edge = fg.edge(e);
      const auto image_i =
          edge.proj_i.apply_config(fg.factor(edge.i).domain, minimizer[static_cast<std::size_t>(edge.i)]);
      const auto image_j =
          edge.proj_j.apply_config(fg.factor(edge.j).domain, minimizer[static_cast<std::size_t>(edge.j)]);
      auto values = result.phi.edge(e);
      for (index k = 0; k < edge.message_dim; ++k) {
        const double g = static_cast<double>(image_i[static_cast<std::size_t>(k)]) -
                         static_cast<double>(image_j[static_cast<std::size_t>(k)]);
        values[static_cast<std::size_t>(k)] += step * g;
      }
    }
    result.best_dual = std::max(result.best_dual, dual_lower_bound(fg, result.phi));
    result.best_trace.push_back(result.best_dual);
  }
  return result;
}

IlpResult brute_force_ilp(const FactorGraph& fg, std::size_t work_cap)
{
  const index nf = static_cast<index>(fg.factor_count());

  // Edges whose both endpoints are assigned once factor i is, checked during
  // the descent so inconsistent partial products are pruned immediately.
  std::vector<std::vector<index>> check_at(fg.factor_count());
  for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e) {
    const auto& edge = fg.edge(e);
    check_at[static_cast<std::size_t>(std::max(edge.i, edge.j))].push_back(e);
  }

  IlpResult result;
  Labeling current(fg.factor_count(), 0);
  std::size_t visited = 0;

  std::function<void(index)> descend = [&](index i) {
    if (i == nf) {
      const cost value = labeling_cost(fg, DualVariables(fg), current);
      if (!result.feasible || value < result.value) {
        result.feasible = true;
        result.value = value;
        result.labeling = current;
      }
      return;
    }
    const auto& factor = fg.factor(i);
    const std::size_t n = factor.domain.config_count();
    for (std::size_t c = 0; c < n; ++c) {
      if (++visited > work_cap)
        throw solver_error("brute force enumeration exceeds the size cap");
      current[static_cast<std::size_t>(i)] = c;
      bool consistent = true;
      for (index e : check_at[static_cast<std::size_t>(i)]) {
        const auto& edge = fg.edge(e);
        const auto image_i = edge.proj_i.apply_config(fg.factor(edge.i).domain,
                                                      current[static_cast<std::size_t>(edge.i)]);
        const auto image_j = edge.proj_j.apply_config(fg.factor(edge.j).domain,
                                                      current[static_cast<std::size_t>(edge.j)]);
        if (image_i != image_j) {
          consistent = false;
          break;
        }
      }
      if (consistent)
        descend(i + 1);
    }
  };
  descend(0);
  return result;
}

namespace {

void enumerate_partitions(index n, const std::function<void(const std::vector<index>&)>& visit)
{
  // Restricted growth strings: ids[v] <= 1 + max(ids[0..v-1]).
  std::vector<index> ids(static_cast<std::size_t>(n), 0);
  std::function<void(index, index)> descend = [&](index v, index used) {
    if (v == n) {
      visit(ids);
      return;
    }
    for (index c = 0; c <= used; ++c) {
      ids[static_cast<std::size_t>(v)] = c;
      descend(v + 1, std::max(used, static_cast<index>(c + 1)));
    }
  };
  if (n > 0)
    descend(0, 0);
  else
    visit(ids);
}

} // namespace

MulticutOptimum brute_force_multicut(const mc::MulticutInstance& instance)
{
  if (instance.num_vertices > 10)
    throw solver_error("brute force multicut limited to 10 vertices");
  MulticutOptimum best;
  enumerate_partitions(instance.num_vertices, [&](const std::vector<index>& ids) {
    const cost value = mc::multicut_cost(instance, ids);
    if (best.partition.empty() || value < best.value) {
      best.partition = ids;
      best.value = value;
    }
  });
  if (instance.num_vertices == 0)
    best.value = 0;
  return best;
}

MatchingOptimum brute_force_matching(const gm::MatchingModel& model)
{
  const index n = model.backbone.node_count();
  if (n > 8)
    throw solver_error("brute force matching limited to 8 nodes");

  MatchingOptimum best;
  std::vector<index> assignment(static_cast<std::size_t>(n), gm::unassigned);
  std::vector<bool> used(static_cast<std::size_t>(model.universe_size), false);

  std::function<void(index)> descend = [&](index u) {
    if (u == n) {
      const cost value = gm::assignment_cost(model, assignment);
      if (!best.feasible || value < best.value) {
        best.feasible = true;
        best.value = value;
        best.assignment = assignment;
      }
      return;
    }
    for (index label : model.candidates[static_cast<std::size_t>(u)]) {
      if (used[static_cast<std::size_t>(label)])
        continue;
      used[static_cast<std::size_t>(label)] = true;
      assignment[static_cast<std::size_t>(u)] = label;
      descend(u + 1);
      assignment[static_cast<std::size_t>(u)] = gm::unassigned;
      used[static_cast<std::size_t>(label)] = false;
    }
  };
  descend(0);
  return best;
}

} // namespace dualmp
