#include "dualmp/mrf.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <numeric>
#include <set>

namespace dualmp::mrf {

void validate_model(PairwiseModel& model)
{
  const index n = model.node_count();
  for (index u = 0; u < n; ++u)
    if (model.label_count(u) <= 0)
      throw invalid_instance("node " + std::to_string(u) + " has no labels");

  std::set<std::pair<index, index>> seen;
  for (auto& edge : model.edges) {
    if (edge.u < 0 || edge.u >= n || edge.v < 0 || edge.v >= n)
      throw invalid_instance("edge references unknown node");
    if (edge.u == edge.v)
      throw invalid_instance("self-loop edge");
    if (edge.u > edge.v) {
      // normalize to u < v, transposing the table
      std::vector<cost> transposed(edge.table.size());
      const index rows = model.label_count(edge.u), cols = model.label_count(edge.v);
      for (index a = 0; a < rows; ++a)
        for (index b = 0; b < cols; ++b)
          transposed[static_cast<std::size_t>(b * rows + a)] =
              edge.table[static_cast<std::size_t>(a * cols + b)];
      edge.table = std::move(transposed);
      std::swap(edge.u, edge.v);
    }
    if (!seen.insert({edge.u, edge.v}).second)
      throw invalid_instance("duplicate edge");
    if (static_cast<index>(edge.table.size()) != model.label_count(edge.u) * model.label_count(edge.v))
      throw invalid_instance("pairwise table shape does not match label counts");
  }
}

NodeOrder make_node_order(const PairwiseModel& model, std::vector<index> order)
{
  const index n = model.node_count();
  if (static_cast<index>(order.size()) != n)
    throw invalid_instance("node order must be a permutation of the nodes");
  NodeOrder result;
  result.order = std::move(order);
  result.position.assign(static_cast<std::size_t>(n), -1);
  for (index pos = 0; pos < n; ++pos) {
    const index u = result.order[static_cast<std::size_t>(pos)];
    if (u < 0 || u >= n || result.position[static_cast<std::size_t>(u)] != -1)
      throw invalid_instance("node order must be a permutation of the nodes");
    result.position[static_cast<std::size_t>(u)] = pos;
  }
  result.incoming.assign(static_cast<std::size_t>(n), {});
  result.outgoing.assign(static_cast<std::size_t>(n), {});
  for (index k = 0; k < static_cast<index>(model.edges.size()); ++k) {
    const auto& edge = model.edges[static_cast<std::size_t>(k)];
    const bool u_first = result.position[static_cast<std::size_t>(edge.u)] <
                         result.position[static_cast<std::size_t>(edge.v)];
    const index early = u_first ? edge.u : edge.v;
    const index late = u_first ? edge.v : edge.u;
    result.outgoing[static_cast<std::size_t>(early)].push_back(k);
    result.incoming[static_cast<std::size_t>(late)].push_back(k);
  }
  return result;
}

NodeOrder identity_order(const PairwiseModel& model)
{
  std::vector<index> order(static_cast<std::size_t>(model.node_count()));
  std::iota(order.begin(), order.end(), 0);
  return make_node_order(model, std::move(order));
}

index node_factor(index u)
{
  return u;
}

index edge_factor(const PairwiseModel& model, index k)
{
  return model.node_count() + k;
}

namespace {

// Coupling ids as laid down by build_crf_factor_graph: per model edge k, the
// lower endpoint's coupling is 2k and the higher endpoint's is 2k+1.
index coupling_id(const PairwiseModel& model, index k, index endpoint)
{
  const auto& edge = model.edges[static_cast<std::size_t>(k)];
  assert(endpoint == edge.u || endpoint == edge.v);
  return 2 * k + (endpoint == edge.u ? 0 : 1);
}

Projection row_marginalization(index rows, index cols)
{
  Projection p;
  p.rows = rows;
  for (index a = 0; a < rows; ++a)
    for (index b = 0; b < cols; ++b)
      p.entries.emplace_back(a, a * cols + b);
  return p;
}

Projection col_marginalization(index rows, index cols)
{
  Projection p;
  p.rows = cols;
  for (index a = 0; a < rows; ++a)
    for (index b = 0; b < cols; ++b)
      p.entries.emplace_back(b, a * cols + b);
  return p;
}

} // namespace

FactorGraph build_crf_factor_graph(const PairwiseModel& model)
{
  std::vector<FactorSpec> factors;
  factors.reserve(model.unaries.size() + model.edges.size());
  for (index u = 0; u < model.node_count(); ++u)
    factors.push_back({FactorDomain::simplex(model.label_count(u)),
                       model.unaries[static_cast<std::size_t>(u)]});
  for (const auto& edge : model.edges)
    factors.push_back(
        {FactorDomain::pairwise_table(model.label_count(edge.u), model.label_count(edge.v)),
         edge.table});

  std::vector<CouplingSpec> couplings;
  couplings.reserve(2 * model.edges.size());
  for (index k = 0; k < static_cast<index>(model.edges.size()); ++k) {
    const auto& edge = model.edges[static_cast<std::size_t>(k)];
    const index rows = model.label_count(edge.u), cols = model.label_count(edge.v);
    const index ef = edge_factor(model, k);
    couplings.push_back(
        {node_factor(edge.u), ef, Projection::identity(rows), row_marginalization(rows, cols)});
    couplings.push_back(
        {node_factor(edge.v), ef, Projection::identity(cols), col_marginalization(rows, cols)});
  }
  return build_factor_graph(std::move(factors), std::move(couplings));
}

std::vector<cost> node_to_edge_message(std::span<const cost> node_costs)
{
  const cost m0 = *std::min_element(node_costs.begin(), node_costs.end());
  std::vector<cost> delta(node_costs.size());
  for (std::size_t s = 0; s < node_costs.size(); ++s)
    delta[s] = m0 - node_costs[s];
  return delta;
}

std::vector<cost> edge_to_node_message(std::span<const cost> table, index rows, index cols,
                                       bool toward_rows)
{
  const cost m0 = *std::min_element(table.begin(), table.end());
  std::vector<cost> marginal(static_cast<std::size_t>(toward_rows ? rows : cols), infinite_cost);
  for (index a = 0; a < rows; ++a)
    for (index b = 0; b < cols; ++b) {
      const cost v = table[static_cast<std::size_t>(a * cols + b)];
      auto& m = marginal[static_cast<std::size_t>(toward_rows ? a : b)];
      m = std::min(m, v);
    }
  std::vector<cost> delta(marginal.size());
  for (std::size_t k = 0; k < marginal.size(); ++k)
    delta[k] = m0 - marginal[k];
  return delta;
}

Schedule schedule_srmp(const PairwiseModel& model, const NodeOrder& order)
{
  Schedule schedule;
  const auto make_pass = [&](bool backward) {
    std::vector<VisitRecord> records;
    records.reserve(order.order.size());
    const auto& list = order.order;
    for (std::size_t pos = 0; pos < list.size(); ++pos) {
      const index u = backward ? list[list.size() - 1 - pos] : list[pos];
      const auto& in = order.incoming[static_cast<std::size_t>(u)];
      const auto& out = order.outgoing[static_cast<std::size_t>(u)];
      const auto& receive_from = backward ? out : in;
      const auto& send_to = backward ? in : out;

      VisitRecord rec;
      rec.factor = node_factor(u);
      for (index k : receive_from)
        rec.receive.push_back(coupling_id(model, k, u));
      const std::size_t denom = std::max(in.size(), out.size());
      for (index k : send_to) {
        rec.blocks.push_back({coupling_id(model, k, u)});
        rec.weights.push_back(1.0 / static_cast<cost>(denom));
      }
      records.push_back(std::move(rec));
    }
    return records;
  };
  schedule.forward = make_pass(false);
  schedule.backward = make_pass(true);
  schedule.reverse_each_iteration = true;
  return schedule;
}

Schedule schedule_msd(const PairwiseModel& model)
{
  Schedule schedule;
  std::vector<VisitRecord> records;
  for (index u = 0; u < model.node_count(); ++u) {
    VisitRecord rec;
    rec.factor = node_factor(u);
    std::vector<index> incident;
    for (index k = 0; k < static_cast<index>(model.edges.size()); ++k) {
      const auto& edge = model.edges[static_cast<std::size_t>(k)];
      if (edge.u == u || edge.v == u)
        incident.push_back(coupling_id(model, k, u));
    }
    rec.receive = incident;
    for (index c : incident) {
      rec.blocks.push_back({c});
      rec.weights.push_back(1.0 / static_cast<cost>(incident.size()));
    }
    records.push_back(std::move(rec));
  }
  // Edge factors take part with empty receive and send sets.
  for (index k = 0; k < static_cast<index>(model.edges.size()); ++k)
    records.push_back(VisitRecord{edge_factor(model, k), {}, {}, {}});

  schedule.forward = records;
  std::reverse(records.begin(), records.end());
  schedule.backward = std::move(records);
  schedule.reverse_each_iteration = true;
  return schedule;
}

Schedule schedule_mplp(const PairwiseModel& model)
{
  Schedule schedule;
  std::vector<VisitRecord> records;
  for (index k = 0; k < static_cast<index>(model.edges.size()); ++k) {
    const auto& edge = model.edges[static_cast<std::size_t>(k)];
    VisitRecord rec;
    rec.factor = edge_factor(model, k);
    rec.receive = {coupling_id(model, k, edge.u), coupling_id(model, k, edge.v)};
    rec.blocks = {{coupling_id(model, k, edge.u)}, {coupling_id(model, k, edge.v)}};
    rec.weights = {0.5, 0.5};
    records.push_back(std::move(rec));
  }
  schedule.forward = records;
  std::reverse(records.begin(), records.end());
  schedule.backward = std::move(records);
  schedule.reverse_each_iteration = true;
  return schedule;
}

Schedule make_schedule(const PairwiseModel& model, CrfScheduleKind kind, const NodeOrder& order)
{
  switch (kind) {
    case CrfScheduleKind::srmp: return schedule_srmp(model, order);
    case CrfScheduleKind::msd: return schedule_msd(model);
    case CrfScheduleKind::mplp: return schedule_mplp(model);
  }
  throw solver_error("unknown schedule kind");
}

namespace {

// Conditioned label choice for node u given the already assigned earlier
// nodes: argmin of theta^phi_u plus reparametrized pairwise rows.
index conditioned_argmin(const PairwiseModel& model, const FactorGraph& fg,
                         const DualVariables& phi, const NodeOrder& order, index u,
                         std::span<const index> labels)
{
  auto theta = reparametrized_cost(fg, phi, node_factor(u));
  for (index k : order.incoming[static_cast<std::size_t>(u)]) {
    const auto& edge = model.edges[static_cast<std::size_t>(k)];
    const index w = edge.u == u ? edge.v : edge.u;
    const index xw = labels[static_cast<std::size_t>(w)];
    if (xw < 0)
      continue;
    const auto pair = reparametrized_cost(fg, phi, edge_factor(model, k));
    const index cols = model.label_count(edge.v);
    for (index s = 0; s < static_cast<index>(theta.size()); ++s) {
      const index a = edge.u == u ? s : xw;
      const index b = edge.u == u ? xw : s;
      theta[static_cast<std::size_t>(s)] += pair[static_cast<std::size_t>(a * cols + b)];
    }
  }
  return static_cast<index>(std::min_element(theta.begin(), theta.end()) - theta.begin());
}

} // namespace

std::vector<index> round_crf(const PairwiseModel& model, const FactorGraph& fg,
                             const DualVariables& phi, const NodeOrder& order)
{
  DualVariables scratch = phi;
  Schedule pass = schedule_srmp(model, order);
  pass.reverse_each_iteration = false;

  // A backward pass first, so the forward rounding pass starts from the
  // state it has inside the regular forward/backward alternation.
  pass.next_backward = true;
  run_iteration(fg, scratch, pass);
  pass.next_backward = false;

  std::vector<index> labels(static_cast<std::size_t>(model.node_count()), -1);
  const PreVisitHook hook = [&](const VisitRecord& rec, bool) {
    if (rec.factor >= model.node_count())
      return;
    labels[static_cast<std::size_t>(rec.factor)] =
        conditioned_argmin(model, fg, scratch, order, rec.factor, labels);
  };
  run_iteration(fg, scratch, pass, hook);
  return labels;
}

Labeling crf_labeling(const PairwiseModel& model, std::span<const index> node_labels)
{
  Labeling labeling(static_cast<std::size_t>(model.node_count() + static_cast<index>(model.edges.size())));
  for (index u = 0; u < model.node_count(); ++u)
    labeling[static_cast<std::size_t>(u)] = static_cast<std::size_t>(node_labels[static_cast<std::size_t>(u)]);
  for (index k = 0; k < static_cast<index>(model.edges.size()); ++k) {
    const auto& edge = model.edges[static_cast<std::size_t>(k)];
    const index cols = model.label_count(edge.v);
    const index a = node_labels[static_cast<std::size_t>(edge.u)];
    const index b = node_labels[static_cast<std::size_t>(edge.v)];
    labeling[static_cast<std::size_t>(edge_factor(model, k))] = static_cast<std::size_t>(a * cols + b);
  }
  return labeling;
}

cost crf_labeling_cost(const PairwiseModel& model, std::span<const index> node_labels)
{
  cost total = 0;
  for (index u = 0; u < model.node_count(); ++u)
    total += model.unaries[static_cast<std::size_t>(u)]
                          [static_cast<std::size_t>(node_labels[static_cast<std::size_t>(u)])];
  for (const auto& edge : model.edges) {
    const index cols = model.label_count(edge.v);
    const index a = node_labels[static_cast<std::size_t>(edge.u)];
    const index b = node_labels[static_cast<std::size_t>(edge.v)];
    total += edge.table[static_cast<std::size_t>(a * cols + b)];
  }
  return total;
}

CrfSolveResult solve_crf(const PairwiseModel& model, CrfScheduleKind kind, const NodeOrder& order,
                         const SolveOptions& options)
{
  const auto started = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                 started)
        .count();
  };

  const FactorGraph fg = build_crf_factor_graph(model);
  DualVariables phi(fg);
  Schedule schedule = make_schedule(model, kind, order);
  validate_schedule(fg, schedule);

  CrfSolveResult result;
  cost dual = dual_lower_bound(fg, phi);
  result.records.push_back({0, elapsed_ms(), dual, {}, RecordEvent::iterate});

  const auto try_round = [&](const std::vector<index>& labels) {
    const cost value = crf_labeling_cost(model, labels);
    if (value < result.best_primal) {
      result.best_primal = value;
      result.best_labels = labels;
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
      try_round(round_crf(model, fg, phi, order));
      rounded_once = true;
    }
    result.records.push_back({iter, elapsed_ms(), next,
                              rounded_once ? std::optional<cost>(result.best_primal) : std::nullopt,
                              round_due ? RecordEvent::round : RecordEvent::iterate});

    const cost improvement = next - dual;
    slow_progress = improvement < 1e-4 * std::max(1.0, std::abs(next));
    const bool converged = improvement <= options.tolerance * std::max(1.0, std::abs(next));
    dual = next;
    if (converged && (rounded_once || iter == options.max_iterations))
      break;
  }
  result.dual_bound = dual;

  if (!rounded_once) {
    try_round(round_crf(model, fg, phi, order));
    result.records.push_back({result.iterations, elapsed_ms(), dual, result.best_primal,
                              RecordEvent::round});
  }
  return result;
}

} // namespace dualmp::mrf
