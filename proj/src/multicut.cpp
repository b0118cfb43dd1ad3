#include "dualmp/multicut.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <deque>
#include <map>
#include <numeric>

namespace dualmp::mc {

namespace {

const std::array<std::array<std::uint8_t, 3>, 5> cycle_configs = {{
    {0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1},
}};

} // namespace

index MulticutInstance::find_edge(index a, index b) const
{
  const index u = std::min(a, b), v = std::max(a, b);
  for (index e = 0; e < static_cast<index>(edges.size()); ++e)
    if (edges[static_cast<std::size_t>(e)].u == u && edges[static_cast<std::size_t>(e)].v == v)
      return e;
  return -1;
}

void validate_instance(const MulticutInstance& instance)
{
  std::set<std::pair<index, index>> seen;
  for (const auto& edge : instance.edges) {
    if (edge.u < 0 || edge.u >= instance.num_vertices || edge.v < 0 ||
        edge.v >= instance.num_vertices)
      throw invalid_instance("edge references unknown vertex");
    if (edge.u == edge.v)
      throw invalid_instance("self-loop edge");
    if (edge.u > edge.v)
      throw invalid_instance("edges must be stored with u < v");
    if (!seen.insert({edge.u, edge.v}).second)
      throw invalid_instance("duplicate edge");
    if (edge.auxiliary && edge.weight != 0)
      throw invalid_instance("auxiliary edges must have zero weight");
  }
}

std::array<index, 3> triangle_edge_ids(const MulticutInstance& instance, const Triangle& t)
{
  if (!(t[0] < t[1] && t[1] < t[2]))
    throw invalid_instance("triangle vertices must be strictly ascending");
  const std::array<index, 3> ids = {instance.find_edge(t[0], t[1]), instance.find_edge(t[0], t[2]),
                                    instance.find_edge(t[1], t[2])};
  for (index e : ids)
    if (e < 0)
      throw invalid_instance("cycle is not a triangle of instance edges");
  return ids;
}

index edge_factor(index e)
{
  return e;
}

index cycle_factor(const MulticutInstance& instance, index c)
{
  return static_cast<index>(instance.edges.size()) + c;
}

FactorGraph build_multicut_factor_graph(const MulticutInstance& instance,
                                        const std::vector<Triangle>& cycles)
{
  validate_instance(instance);
  std::vector<FactorSpec> factors;
  factors.reserve(instance.edges.size() + cycles.size());
  for (const auto& edge : instance.edges)
    factors.push_back({FactorDomain::cut_edge(), {edge.weight}});
  for (std::size_t c = 0; c < cycles.size(); ++c)
    factors.push_back({FactorDomain::cycle_triangle(), {0.0, 0.0, 0.0}});

  std::vector<CouplingSpec> couplings;
  couplings.reserve(3 * cycles.size());
  for (index c = 0; c < static_cast<index>(cycles.size()); ++c) {
    const auto ids = triangle_edge_ids(instance, cycles[static_cast<std::size_t>(c)]);
    for (index t = 0; t < 3; ++t)
      couplings.push_back({edge_factor(ids[static_cast<std::size_t>(t)]),
                           cycle_factor(instance, c), Projection::single_coordinate(0),
                           Projection::single_coordinate(t)});
  }
  return build_factor_graph(std::move(factors), std::move(couplings));
}

CycleMin cycle_min_oracle(const std::array<cost, 3>& costs)
{
  CycleMin best;
  best.config = 0;
  best.pattern = cycle_configs[0];
  best.value = 0;
  for (std::size_t c = 0; c < cycle_configs.size(); ++c) {
    cost v = 0;
    for (std::size_t t = 0; t < 3; ++t)
      if (cycle_configs[c][t])
        v += costs[t];
    if (c == 0 || v < best.value) {
      best.config = c;
      best.pattern = cycle_configs[c];
      best.value = v;
    }
  }
  return best;
}

cost cycle_to_edge_message(const std::array<cost, 3>& costs, index coord)
{
  cost cut_min = infinite_cost, keep_min = infinite_cost;
  for (const auto& config : cycle_configs) {
    cost v = 0;
    for (std::size_t t = 0; t < 3; ++t)
      if (config[t])
        v += costs[t];
    if (config[static_cast<std::size_t>(coord)])
      cut_min = std::min(cut_min, v);
    else
      keep_min = std::min(keep_min, v);
  }
  return keep_min - cut_min;
}

cost cut_edge_message(cost reparametrized_edge_cost)
{
  return -reparametrized_edge_cost;
}

std::vector<Triangle> enumerate_triangles(const MulticutInstance& instance)
{
  const index n = instance.num_vertices;
  std::vector<std::vector<std::uint8_t>> adjacent(
      static_cast<std::size_t>(n), std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  for (const auto& edge : instance.edges) {
    adjacent[static_cast<std::size_t>(edge.u)][static_cast<std::size_t>(edge.v)] = 1;
    adjacent[static_cast<std::size_t>(edge.v)][static_cast<std::size_t>(edge.u)] = 1;
  }
  std::vector<Triangle> triangles;
  for (index u = 0; u < n; ++u)
    for (index v = u + 1; v < n; ++v) {
      if (!adjacent[static_cast<std::size_t>(u)][static_cast<std::size_t>(v)])
        continue;
      for (index w = v + 1; w < n; ++w)
        if (adjacent[static_cast<std::size_t>(u)][static_cast<std::size_t>(w)] &&
            adjacent[static_cast<std::size_t>(v)][static_cast<std::size_t>(w)])
          triangles.push_back({u, v, w});
    }
  return triangles;
}

int chordal_completion(MulticutInstance& instance, std::span<const cost> edge_costs)
{
  constexpr cost eps = 1e-9;
  int added = 0;
  const index original_edges = static_cast<index>(instance.edges.size());
  for (index e = 0; e < original_edges; ++e) {
    if (edge_costs[static_cast<std::size_t>(e)] >= -eps)
      continue;
    const index source = instance.edges[static_cast<std::size_t>(e)].u;
    const index sink = instance.edges[static_cast<std::size_t>(e)].v;

    // Shortest positive-edge path closing a mixed-sign cycle with e.
    std::vector<index> parent(static_cast<std::size_t>(instance.num_vertices), -1);
    std::deque<index> queue;
    parent[static_cast<std::size_t>(source)] = source;
    queue.push_back(source);
    while (!queue.empty() && parent[static_cast<std::size_t>(sink)] == -1) {
      const index x = queue.front();
      queue.pop_front();
      for (index f = 0; f < original_edges; ++f) {
        if (f == e || edge_costs[static_cast<std::size_t>(f)] <= eps)
          continue;
        const auto& fe = instance.edges[static_cast<std::size_t>(f)];
        if (fe.u != x && fe.v != x)
          continue;
        const index y = fe.u == x ? fe.v : fe.u;
        if (parent[static_cast<std::size_t>(y)] != -1)
          continue;
        parent[static_cast<std::size_t>(y)] = x;
        queue.push_back(y);
      }
    }
    if (parent[static_cast<std::size_t>(sink)] == -1)
      continue;

    std::vector<index> path; // sink back to source
    for (index x = sink; x != source; x = parent[static_cast<std::size_t>(x)])
      path.push_back(x);
    path.push_back(source);
    // Fan triangulation: auxiliary chords from the source to the inner path
    // vertices.
    for (std::size_t p = 1; p + 1 < path.size(); ++p) {
      const index x = path[p];
      if (instance.find_edge(source, x) >= 0)
        continue;
      instance.edges.push_back(
          {std::min(source, x), std::max(source, x), 0.0, true});
      ++added;
    }
  }
  return added;
}

cost triangle_bound_gain(const MulticutInstance& instance, std::span<const cost> edge_costs,
                         const Triangle& t)
{
  const auto ids = triangle_edge_ids(instance, t);
  const std::array<cost, 3> costs = {edge_costs[static_cast<std::size_t>(ids[0])],
                                     edge_costs[static_cast<std::size_t>(ids[1])],
                                     edge_costs[static_cast<std::size_t>(ids[2])]};
  const cost joint = cycle_min_oracle(costs).value;
  cost independent = 0;
  for (cost c : costs)
    independent += std::min(0.0, c);
  return joint - independent;
}

std::vector<Triangle> separate_triangles(const MulticutInstance& instance,
                                         std::span<const cost> edge_costs,
                                         const std::set<Triangle>& active, index budget)
{
  if (budget < 0)
    throw solver_error("separation budget must be nonnegative");
  std::vector<std::pair<cost, Triangle>> candidates;
  for (const auto& t : enumerate_triangles(instance)) {
    if (active.count(t))
      continue;
    const cost gain = triangle_bound_gain(instance, edge_costs, t);
    if (gain > 1e-9)
      candidates.emplace_back(gain, t);
  }
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first)
      return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<Triangle> out;
  for (std::size_t c = 0; c < candidates.size() && static_cast<index>(out.size()) < budget; ++c)
    out.push_back(candidates[c].second);
  return out;
}

Schedule schedule_multicut(const MulticutInstance& instance, const FactorGraph& fg)
{
  Schedule schedule;
  for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e) {
    VisitRecord rec;
    rec.factor = edge_factor(e);
    for (const auto& inc : fg.incident(rec.factor))
      rec.receive.push_back(inc.edge);
    for (index c : rec.receive) {
      rec.blocks.push_back({c});
      rec.weights.push_back(1.0 / static_cast<cost>(rec.receive.size()));
    }
    schedule.forward.push_back(std::move(rec));
  }
  schedule.backward.assign(schedule.forward.rbegin(), schedule.forward.rend());
  schedule.reverse_each_iteration = true;
  return schedule;
}

namespace {

std::vector<index> normalize_partition(std::vector<index> ids)
{
  std::map<index, index> remap;
  for (index& id : ids) {
    const auto [it, inserted] = remap.try_emplace(id, static_cast<index>(remap.size()));
    id = it->second;
  }
  return ids;
}

} // namespace

GraphPartition round_multicut_kl(const MulticutInstance& instance, std::span<const cost> edge_costs)
{
  const index n = instance.num_vertices;
  // Start from the components joined by attractive (positive) edges.
  std::vector<index> comp(static_cast<std::size_t>(n));
  std::iota(comp.begin(), comp.end(), 0);
  const std::function<index(index)> find = [&](index x) {
    while (comp[static_cast<std::size_t>(x)] != x)
      x = comp[static_cast<std::size_t>(x)] = comp[static_cast<std::size_t>(comp[static_cast<std::size_t>(x)])];
    return x;
  };
  for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e)
    if (edge_costs[static_cast<std::size_t>(e)] > 0) {
      const auto& edge = instance.edges[static_cast<std::size_t>(e)];
      comp[static_cast<std::size_t>(find(edge.u))] = find(edge.v);
    }
  GraphPartition partition(static_cast<std::size_t>(n));
  for (index v = 0; v < n; ++v)
    partition[static_cast<std::size_t>(v)] = find(v);
  partition = normalize_partition(std::move(partition));

  const auto between = [&](index a, index b) {
    cost total = 0;
    for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e) {
      const auto& edge = instance.edges[static_cast<std::size_t>(e)];
      const index cu = partition[static_cast<std::size_t>(edge.u)];
      const index cv = partition[static_cast<std::size_t>(edge.v)];
      if ((cu == a && cv == b) || (cu == b && cv == a))
        total += edge_costs[static_cast<std::size_t>(e)];
    }
    return total;
  };

  constexpr cost eps = 1e-12;
  for (int pass = 0; pass < 100; ++pass) {
    bool improved = false;

    // (a) merge adjacent components while some merge strictly pays off
    for (;;) {
      std::set<std::pair<index, index>> adjacent;
      for (const auto& edge : instance.edges) {
        const index a = partition[static_cast<std::size_t>(edge.u)];
        const index b = partition[static_cast<std::size_t>(edge.v)];
        if (a != b)
          adjacent.insert({std::min(a, b), std::max(a, b)});
      }
      cost best_gain = eps;
      std::pair<index, index> best_pair{-1, -1};
      for (const auto& [a, b] : adjacent) {
        const cost gain = between(a, b); // uncutting these edges removes their cost
        if (gain > best_gain) {
          best_gain = gain;
          best_pair = {a, b};
        }
      }
      if (best_pair.first < 0)
        break;
      for (index v = 0; v < n; ++v)
        if (partition[static_cast<std::size_t>(v)] == best_pair.second)
          partition[static_cast<std::size_t>(v)] = best_pair.first;
      partition = normalize_partition(std::move(partition));
      improved = true;
    }

    // (b) single-vertex moves between adjacent components
    for (index v = 0; v < n; ++v) {
      std::set<index> neighbor_comps;
      cost to_own = 0;
      std::map<index, cost> to_comp;
      for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e) {
        const auto& edge = instance.edges[static_cast<std::size_t>(e)];
        if (edge.u != v && edge.v != v)
          continue;
        const index w = edge.u == v ? edge.v : edge.u;
        const index cw = partition[static_cast<std::size_t>(w)];
        if (cw == partition[static_cast<std::size_t>(v)])
          to_own += edge_costs[static_cast<std::size_t>(e)];
        else {
          neighbor_comps.insert(cw);
          to_comp[cw] += edge_costs[static_cast<std::size_t>(e)];
        }
      }
      for (index target : neighbor_comps) {
        // moving v cuts its intra-component edges and uncuts those to target
        const cost delta = to_own - to_comp[target];
        if (delta < -eps) {
          partition[static_cast<std::size_t>(v)] = target;
          partition = normalize_partition(std::move(partition));
          improved = true;
          break;
        }
      }
    }

    if (!improved)
      break;
  }
  return normalize_partition(std::move(partition));
}

cost multicut_cost(const MulticutInstance& instance, const GraphPartition& partition)
{
  cost total = 0;
  for (const auto& edge : instance.edges)
    if (partition[static_cast<std::size_t>(edge.u)] != partition[static_cast<std::size_t>(edge.v)])
      total += edge.weight;
  return total;
}

cost partition_cut_cost(const MulticutInstance& instance, std::span<const cost> edge_costs,
                        const GraphPartition& partition)
{
  cost total = 0;
  for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e) {
    const auto& edge = instance.edges[static_cast<std::size_t>(e)];
    if (partition[static_cast<std::size_t>(edge.u)] != partition[static_cast<std::size_t>(edge.v)])
      total += edge_costs[static_cast<std::size_t>(e)];
  }
  return total;
}

std::vector<std::uint8_t> partition_cut_vector(const MulticutInstance& instance,
                                               const GraphPartition& partition)
{
  std::vector<std::uint8_t> cut(instance.edges.size(), 0);
  for (std::size_t e = 0; e < instance.edges.size(); ++e) {
    const auto& edge = instance.edges[e];
    cut[e] = partition[static_cast<std::size_t>(edge.u)] != partition[static_cast<std::size_t>(edge.v)]
                 ? 1
                 : 0;
  }
  return cut;
}

std::vector<cost> reparametrized_edge_costs(const MulticutInstance& instance, const FactorGraph& fg,
                                            const DualVariables& phi)
{
  std::vector<cost> costs(instance.edges.size());
  for (index e = 0; e < static_cast<index>(instance.edges.size()); ++e)
    costs[static_cast<std::size_t>(e)] = reparametrized_cost(fg, phi, edge_factor(e))[0];
  return costs;
}

McSolveResult solve_multicut(const MulticutInstance& input, const SolveOptions& options)
{
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started)
        .count();
  };

  MulticutInstance instance = input;
  validate_instance(instance);

  std::vector<Triangle> cycles;
  std::set<Triangle> active;
  FactorGraph fg = build_multicut_factor_graph(instance, cycles);
  DualVariables phi(fg);
  Schedule schedule = schedule_multicut(instance, fg);
  validate_schedule(fg, schedule);

  McSolveResult result;
  cost dual = dual_lower_bound(fg, phi);
  result.records.push_back({0, elapsed_ms(), dual, {}, RecordEvent::iterate});

  const auto try_round = [&](int iter) -> void {
    const auto costs = reparametrized_edge_costs(instance, fg, phi);
    const auto partition = round_multicut_kl(instance, costs);
    const cost value = multicut_cost(instance, partition);
    if (value < result.best_primal) {
      result.best_primal = value;
      result.best_partition = partition;
    }
    result.records.push_back(
        {iter, elapsed_ms(), dual, result.best_primal, RecordEvent::round});
  };

  const index budget = options.separation_budget >= 0
                           ? options.separation_budget
                           : static_cast<index>(instance.edges.size());
  const int block = std::max(1, options.tighten_interval);
  if (instance.num_vertices > 0)
    try_round(0); // duals are zero here, so this rounds the raw edge costs

  int iter = 0;
  bool converged = false;
  while (iter < options.max_iterations) {
    for (int b = 0; b < block && iter < options.max_iterations; ++b) {
      const cost next = run_iteration(fg, phi, schedule);
      ++iter;
      result.records.push_back({iter, elapsed_ms(), next, {}, RecordEvent::iterate});
      converged = next - dual <= options.tolerance * std::max(1.0, std::abs(next));
      dual = next;
      if (converged)
        break;
    }
    try_round(iter);

    // Cutting-plane step: activate bound-improving triangles.
    auto costs = reparametrized_edge_costs(instance, fg, phi);
    const int chords_added = chordal_completion(instance, costs);
    costs.resize(instance.edges.size(), 0.0);
    const auto fresh = separate_triangles(instance, costs, active, budget);
    if (fresh.empty() && chords_added == 0) {
      if (converged)
        break;
      continue;
    }
    for (const auto& t : fresh) {
      cycles.push_back(t);
      active.insert(t);
    }
    result.cycles_added += static_cast<int>(fresh.size());

    // Rebuild with the new edge factors and couplings; fresh couplings start
    // at zero duals, existing ones keep their values (the coupling order is
    // preserved, cycles and auxiliary edges are only appended).
    FactorGraph next_fg = build_multicut_factor_graph(instance, cycles);
    DualVariables next_phi(next_fg);
    for (index e = 0; e < static_cast<index>(phi.edge_count()); ++e) {
      auto dst = next_phi.edge(e);
      const auto src = phi.edge(e);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    fg = std::move(next_fg);
    phi = std::move(next_phi);
    const bool was_backward = schedule.next_backward;
    schedule = schedule_multicut(instance, fg);
    schedule.next_backward = was_backward;
    dual = dual_lower_bound(fg, phi);
    result.records.push_back({iter, elapsed_ms(), dual, result.best_primal, RecordEvent::tighten});
    if (!fresh.empty())
      converged = false;
    else if (converged)
      break;
  }

  result.dual_bound = dual;
  result.iterations = iter;
  if (result.best_primal == infinite_cost)
    try_round(iter);
  return result;
}

} // namespace dualmp::mc
