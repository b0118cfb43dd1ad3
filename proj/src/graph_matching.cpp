#include "dualmp/graph_matching.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <set>

namespace dualmp::gm {

void validate_model(MatchingModel& model)
{
  const index n = static_cast<index>(model.backbone.unaries.size());
  if (static_cast<index>(model.candidates.size()) != n)
    throw invalid_instance("candidate sets must cover every node");
  for (index u = 0; u < n; ++u)
    if (model.candidates[static_cast<std::size_t>(u)].empty())
      throw invalid_instance("empty candidate set on node " + std::to_string(u));
  mrf::validate_model(model.backbone);
  for (index u = 0; u < n; ++u) {
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];
    if (static_cast<index>(cands.size()) != model.backbone.label_count(u))
      throw invalid_instance("candidate set size does not match unary costs");
    for (std::size_t p = 0; p < cands.size(); ++p) {
      if (cands[p] < 0 || cands[p] >= model.universe_size)
        throw invalid_instance("candidate label outside the universe");
      if (p > 0 && cands[p] <= cands[p - 1])
        throw invalid_instance("candidate sets must be strictly ascending");
    }
  }
  model.label_costs.assign(static_cast<std::size_t>(model.universe_size), {});
  for (index s = 0; s < model.universe_size; ++s)
    model.label_costs[static_cast<std::size_t>(s)]
        .assign(label_candidates(model, s).size() + 1, 0.0);
}

std::vector<index> label_candidates(const MatchingModel& model, index label)
{
  std::vector<index> nodes;
  for (index u = 0; u < model.backbone.node_count(); ++u) {
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];
    if (std::binary_search(cands.begin(), cands.end(), label))
      nodes.push_back(u);
  }
  return nodes;
}

index node_factor(index u)
{
  return u;
}

index edge_factor(const MatchingModel& model, index k)
{
  return model.backbone.node_count() + k;
}

index label_factor(const MatchingModel& model, index label)
{
  return model.backbone.node_count() + static_cast<index>(model.backbone.edges.size()) + label;
}

namespace {

index candidate_position(const MatchingModel& model, index u, index label)
{
  const auto& cands = model.candidates[static_cast<std::size_t>(u)];
  const auto it = std::lower_bound(cands.begin(), cands.end(), label);
  if (it == cands.end() || *it != label)
    return -1;
  return static_cast<index>(it - cands.begin());
}

index crf_coupling_id(const MatchingModel& model, index k, index endpoint)
{
  const auto& edge = model.backbone.edges[static_cast<std::size_t>(k)];
  return 2 * k + (endpoint == edge.u ? 0 : 1);
}

// Couplings laid down by build_gm_factor_graph: the CRF couplings (two per
// backbone edge) first, then one scalar coupling per (node, candidate) pair
// in node order, candidate-position order.
index node_label_coupling_id(const MatchingModel& model, index u, index position)
{
  index id = 2 * static_cast<index>(model.backbone.edges.size());
  for (index w = 0; w < u; ++w)
    id += static_cast<index>(model.candidates[static_cast<std::size_t>(w)].size());
  return id + position;
}

} // namespace

FactorGraph build_gm_factor_graph(const MatchingModel& model)
{
  const index n = model.backbone.node_count();
  for (index u = 0; u < n; ++u)
    if (model.candidates[static_cast<std::size_t>(u)].empty())
      throw invalid_instance("empty candidate set on node " + std::to_string(u));

  std::vector<FactorSpec> factors;
  for (index u = 0; u < n; ++u)
    factors.push_back({FactorDomain::simplex(model.backbone.label_count(u)),
                       model.backbone.unaries[static_cast<std::size_t>(u)]});
  for (const auto& edge : model.backbone.edges)
    factors.push_back({FactorDomain::pairwise_table(model.backbone.label_count(edge.u),
                                                    model.backbone.label_count(edge.v)),
                       edge.table});
  for (index s = 0; s < model.universe_size; ++s) {
    const auto nodes = label_candidates(model, s);
    factors.push_back({FactorDomain::simplex(static_cast<index>(nodes.size()) + 1),
                       std::vector<cost>(nodes.size() + 1, 0.0)});
  }

  std::vector<CouplingSpec> couplings;
  for (index k = 0; k < static_cast<index>(model.backbone.edges.size()); ++k) {
    const auto& edge = model.backbone.edges[static_cast<std::size_t>(k)];
    const index rows = model.backbone.label_count(edge.u);
    const index cols = model.backbone.label_count(edge.v);
    Projection row_marg, col_marg;
    row_marg.rows = rows;
    col_marg.rows = cols;
    for (index a = 0; a < rows; ++a)
      for (index b = 0; b < cols; ++b) {
        row_marg.entries.emplace_back(a, a * cols + b);
        col_marg.entries.emplace_back(b, a * cols + b);
      }
    couplings.push_back(
        {node_factor(edge.u), edge_factor(model, k), Projection::identity(rows), std::move(row_marg)});
    couplings.push_back(
        {node_factor(edge.v), edge_factor(model, k), Projection::identity(cols), std::move(col_marg)});
  }
  for (index u = 0; u < n; ++u) {
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];
    for (index p = 0; p < static_cast<index>(cands.size()); ++p) {
      const index s = cands[static_cast<std::size_t>(p)];
      const auto nodes = label_candidates(model, s);
      const auto it = std::lower_bound(nodes.begin(), nodes.end(), u);
      assert(it != nodes.end() && *it == u);
      const index node_pos = static_cast<index>(it - nodes.begin());
      couplings.push_back({node_factor(u), label_factor(model, s),
                           Projection::single_coordinate(p),
                           Projection::single_coordinate(node_pos)});
    }
  }
  return build_factor_graph(std::move(factors), std::move(couplings));
}

cost label_factor_message(std::span<const cost> label_costs, index coord)
{
  cost other = infinite_cost;
  for (std::size_t s = 0; s < label_costs.size(); ++s)
    if (static_cast<index>(s) != coord)
      other = std::min(other, label_costs[s]);
  if (other == infinite_cost)
    return 0.0;
  return other - label_costs[static_cast<std::size_t>(coord)];
}

cost label_factor_message(const MatchingModel& model, index label, index node,
                          std::span<const cost> label_costs)
{
  const auto nodes = label_candidates(model, label);
  const auto it = std::lower_bound(nodes.begin(), nodes.end(), node);
  if (it == nodes.end() || *it != node)
    throw solver_error("node is not coupled to the label factor");
  return label_factor_message(label_costs, static_cast<index>(it - nodes.begin()));
}

Schedule schedule_amp(const MatchingModel& model, const mrf::NodeOrder& order)
{
  Schedule schedule;
  const auto node_record = [&](index u, bool backward) {
    const auto& in = order.incoming[static_cast<std::size_t>(u)];
    const auto& out = order.outgoing[static_cast<std::size_t>(u)];
    const auto& receive_from = backward ? out : in;
    const auto& send_to = backward ? in : out;
    const auto& cands = model.candidates[static_cast<std::size_t>(u)];

    VisitRecord rec;
    rec.factor = node_factor(u);
    for (index k : receive_from)
      rec.receive.push_back(crf_coupling_id(model, k, u));
    for (index p = 0; p < static_cast<index>(cands.size()); ++p)
      rec.receive.push_back(node_label_coupling_id(model, u, p));

    // Outgoing edges are singleton blocks; all label couplings form one
    // block, so the weights sum to at most one.
    const cost weight = 1.0 / (1.0 + static_cast<cost>(std::max(in.size(), out.size())));
    for (index k : send_to) {
      rec.blocks.push_back({crf_coupling_id(model, k, u)});
      rec.weights.push_back(weight);
    }
    std::vector<index> label_block;
    for (index p = 0; p < static_cast<index>(cands.size()); ++p)
      label_block.push_back(node_label_coupling_id(model, u, p));
    rec.blocks.push_back(std::move(label_block));
    rec.weights.push_back(weight);
    return rec;
  };

  const auto label_record = [&](index s) {
    VisitRecord rec;
    rec.factor = label_factor(model, s);
    const auto nodes = label_candidates(model, s);
    for (index u : nodes) {
      const index p = candidate_position(model, u, s);
      rec.receive.push_back(node_label_coupling_id(model, u, p));
    }
    rec.blocks.push_back(rec.receive); // same single set for sending
    rec.weights.push_back(1.0);
    return rec;
  };

  for (index pos = 0; pos < static_cast<index>(order.order.size()); ++pos)
    schedule.forward.push_back(node_record(order.order[static_cast<std::size_t>(pos)], false));
  std::vector<VisitRecord> label_records;
  for (index s = 0; s < model.universe_size; ++s)
    if (!label_candidates(model, s).empty())
      label_records.push_back(label_record(s));
  for (const auto& rec : label_records)
    schedule.forward.push_back(rec);

  for (auto it = label_records.rbegin(); it != label_records.rend(); ++it)
    schedule.backward.push_back(*it);
  for (index pos = static_cast<index>(order.order.size()) - 1; pos >= 0; --pos)
    schedule.backward.push_back(node_record(order.order[static_cast<std::size_t>(pos)], true));

  schedule.reverse_each_iteration = true;
  return schedule;
}

namespace {

index conditioned_argmin_unused(const MatchingModel& model, const FactorGraph& fg,
                                const DualVariables& phi, const mrf::NodeOrder& order, index u,
                                std::span<const index> assignment)
{
  auto theta = reparametrized_cost(fg, phi, node_factor(u));
  for (index k : order.incoming[static_cast<std::size_t>(u)]) {
    const auto& edge = model.backbone.edges[static_cast<std::size_t>(k)];
    const index w = edge.u == u ? edge.v : edge.u;
    const index assigned = assignment[static_cast<std::size_t>(w)];
    if (assigned == unassigned)
      continue;
    const index xw = candidate_position(model, w, assigned);
    const auto pair = reparametrized_cost(fg, phi, edge_factor(model, k));
    const index cols = model.backbone.label_count(edge.v);
    for (index p = 0; p < static_cast<index>(theta.size()); ++p) {
      const index a = edge.u == u ? p : xw;
      const index b = edge.u == u ? xw : p;
      theta[static_cast<std::size_t>(p)] += pair[static_cast<std::size_t>(a * cols + b)];
    }
  }

  const auto& cands = model.candidates[static_cast<std::size_t>(u)];
  std::set<index> used;
  for (index w = 0; w < model.backbone.node_count(); ++w)
    if (assignment[static_cast<std::size_t>(w)] != unassigned)
      used.insert(assignment[static_cast<std::size_t>(w)]);

  index best = unassigned;
  cost best_value = infinite_cost;
  for (index p = 0; p < static_cast<index>(cands.size()); ++p) {
    if (used.count(cands[static_cast<std::size_t>(p)]))
      continue;
    if (theta[static_cast<std::size_t>(p)] < best_value) {
      best_value = theta[static_cast<std::size_t>(p)];
      best = cands[static_cast<std::size_t>(p)];
    }
  }
  return best;
}

} // namespace

std::vector<index> round_gm(const MatchingModel& model, const FactorGraph& fg,
                            const DualVariables& phi, const mrf::NodeOrder& order)
{
  DualVariables scratch = phi;
  Schedule pass = schedule_amp(model, order);
  pass.reverse_each_iteration = false;

  // A backward pass first, as inside the regular alternation.
  pass.next_backward = true;
  run_iteration(fg, scratch, pass);
  pass.next_backward = false;

  std::vector<index> assignment(static_cast<std::size_t>(model.backbone.node_count()), unassigned);
  const PreVisitHook hook = [&](const VisitRecord& rec, bool) {
    if (rec.factor >= model.backbone.node_count())
      return;
    assignment[static_cast<std::size_t>(rec.factor)] =
        conditioned_argmin_unused(model, fg, scratch, order, rec.factor, assignment);
  };
  run_iteration(fg, scratch, pass, hook);
  return assignment;
}

bool verify_matching(std::span<const index> assignment)
{
  std::set<index> used;
  for (index label : assignment) {
    if (label == unassigned)
      continue;
    if (!used.insert(label).second)
      return false;
  }
  return true;
}

cost assignment_cost(const MatchingModel& model, std::span<const index> assignment)
{
  cost total = 0;
  for (index u = 0; u < model.backbone.node_count(); ++u) {
    const index label = assignment[static_cast<std::size_t>(u)];
    if (label == unassigned)
      return infinite_cost;
    const index p = candidate_position(model, u, label);
    if (p < 0)
      throw solver_error("assigned label is not a candidate");
    total += model.backbone.unaries[static_cast<std::size_t>(u)][static_cast<std::size_t>(p)];
  }
  for (const auto& edge : model.backbone.edges) {
    const index a = candidate_position(model, edge.u, assignment[static_cast<std::size_t>(edge.u)]);
    const index b = candidate_position(model, edge.v, assignment[static_cast<std::size_t>(edge.v)]);
    const index cols = model.backbone.label_count(edge.v);
    total += edge.table[static_cast<std::size_t>(a * cols + b)];
  }
  return total;
}

Labeling gm_labeling(const MatchingModel& model, std::span<const index> assignment)
{
  const index n = model.backbone.node_count();
  const index m = static_cast<index>(model.backbone.edges.size());
  Labeling labeling(static_cast<std::size_t>(n + m + model.universe_size));
  for (index u = 0; u < n; ++u) {
    const index label = assignment[static_cast<std::size_t>(u)];
    if (label == unassigned)
      throw solver_error("cannot build a labeling from an incomplete assignment");
    labeling[static_cast<std::size_t>(u)] =
        static_cast<std::size_t>(candidate_position(model, u, label));
  }
  for (index k = 0; k < m; ++k) {
    const auto& edge = model.backbone.edges[static_cast<std::size_t>(k)];
    const index a = candidate_position(model, edge.u, assignment[static_cast<std::size_t>(edge.u)]);
    const index b = candidate_position(model, edge.v, assignment[static_cast<std::size_t>(edge.v)]);
    const index cols = model.backbone.label_count(edge.v);
    labeling[static_cast<std::size_t>(edge_factor(model, k))] = static_cast<std::size_t>(a * cols + b);
  }
  for (index s = 0; s < model.universe_size; ++s) {
    const auto nodes = label_candidates(model, s);
    std::size_t config = nodes.size(); // dummy: label unused
    for (std::size_t p = 0; p < nodes.size(); ++p)
      if (assignment[static_cast<std::size_t>(nodes[p])] == s)
        config = p;
    labeling[static_cast<std::size_t>(label_factor(model, s))] = config;
  }
  return labeling;
}

GmSolveResult solve_gm(const MatchingModel& model, const mrf::NodeOrder& order,
                       const SolveOptions& options)
{
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started)
        .count();
  };

  const FactorGraph fg = build_gm_factor_graph(model);
  DualVariables phi(fg);
  Schedule schedule = schedule_amp(model, order);
  validate_schedule(fg, schedule);

  GmSolveResult result;
  cost dual = dual_lower_bound(fg, phi);
  result.records.push_back({0, elapsed_ms(), dual, {}, RecordEvent::iterate});

  const auto try_round = [&](const std::vector<index>& assignment) {
    const cost value = assignment_cost(model, assignment);
    if (value < result.best_primal) {
      result.best_primal = value;
      result.best_assignment = assignment;
    }
  };

  bool slow_progress = false;
  bool rounded_once = false;
  int iters_since_round = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const bool round_due =
        slow_progress || (options.round_interval > 0 && iters_since_round >= options.round_interval);
    iters_since_round = round_due ? 0 : iters_since_round + 1;

    const cost next = run_iteration(fg, phi, schedule);
    result.iterations = iter;
    if (round_due) {
      try_round(round_gm(model, fg, phi, order));
      rounded_once = true;
    }
    result.records.push_back({iter, elapsed_ms(), next,
                              result.best_primal < infinite_cost
                                  ? std::optional<cost>(result.best_primal)
                                  : std::nullopt,
                              round_due ? RecordEvent::round : RecordEvent::iterate});

    const cost improvement = next - dual;
    slow_progress = improvement < 1e-4 * std::max(1.0, std::abs(next));
    const bool converged = improvement <= options.tolerance * std::max(1.0, std::abs(next));
    dual = next;
    if (converged && (rounded_once || iter == options.max_iterations))
      break;
  }
  result.dual_bound = dual;

  if (!rounded_once)
    try_round(round_gm(model, fg, phi, order));
  return result;
}

} // namespace dualmp::gm
