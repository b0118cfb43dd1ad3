#include "dualmp/message_engine.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>

#include "dualmp/graph_matching.hpp"
#include "dualmp/mrf.hpp"
#include "dualmp/multicut.hpp"

namespace dualmp {

std::vector<cost> default_direction(const FactorDomain& domain, std::size_t anchor_config)
{
  std::vector<cost> direction(static_cast<std::size_t>(domain.dim), -1.0);
  for (index s : domain.config_support(anchor_config))
    direction[static_cast<std::size_t>(s)] = 1.0;
  return direction;
}

void validate_direction(const FactorDomain& domain, std::size_t anchor_config,
                        std::span<const cost> direction)
{
  if (static_cast<index>(direction.size()) != domain.dim)
    throw solver_error("direction vector length does not match factor dimension");
  for (index s = 0; s < domain.dim; ++s) {
    const cost d = direction[static_cast<std::size_t>(s)];
    if (domain.config_bit(anchor_config, s) ? d <= 0 : d >= 0)
      throw solver_error("direction vector violates the strict sign condition");
  }
}

MinResult min_oracle_theta(const FactorDomain& domain, std::span<const cost> theta)
{
  MinResult result;
  result.config = 0;
  result.value = domain.config_cost(theta, 0);
  const std::size_t n = domain.config_count();
  for (std::size_t c = 1; c < n; ++c) {
    const cost v = domain.config_cost(theta, c);
    if (v < result.value) {
      result.value = v;
      result.config = c;
    }
  }
  return result;
}

MinResult min_oracle(const FactorGraph& fg, const DualVariables& phi, index i)
{
  const auto theta = reparametrized_cost(fg, phi, i);
  return min_oracle_theta(fg.factor(i).domain, theta);
}

namespace {

std::vector<std::uint8_t> sign_pattern_of(const FactorGraph& fg, index factor, index edge_id,
                                          std::size_t config)
{
  const auto& edge = fg.edge(edge_id);
  const bool first = edge.i == factor;
  return edge.proj(first).apply_config(fg.factor(factor).domain, config);
}

#ifndef NDEBUG
void assert_admissible(const FactorGraph& fg, const DualVariables& phi, const MessageUpdate& upd)
{
  const auto& factor = fg.factor(upd.factor);
  auto theta = reparametrized_cost(fg, phi, upd.factor);
  for (std::size_t t = 0; t < upd.target_edges.size(); ++t) {
    const auto& edge = fg.edge(upd.target_edges[t]);
    const bool first = edge.i == upd.factor;
    for (const auto& [k, s] : edge.proj(first).entries)
      theta[static_cast<std::size_t>(s)] += upd.deltas[t][static_cast<std::size_t>(k)];
    for (index k = 0; k < edge.message_dim; ++k) {
      const cost d = upd.deltas[t][static_cast<std::size_t>(k)];
      assert(upd.sign_pattern[t][static_cast<std::size_t>(k)] ? d >= 0 : d <= 0);
    }
  }
  const auto after = min_oracle_theta(factor.domain, theta);
  const cost anchor_after = factor.domain.config_cost(theta, upd.anchor_config);
  assert(anchor_after <= after.value + monotone_slack(after.value));
}
#endif

// Maximal admissible update of a simplex factor towards targets that each
// select distinct coordinates (a full identity counts as all coordinates).
// Lower every covered non-anchor coordinate to the minimum; raise the anchor
// coordinate, when covered, up to the smallest remaining competitor.
std::vector<cost> simplex_subset_deltas(std::span<const cost> theta,
                                        std::span<const index> covered, index anchor)
{
  const cost m0 = *std::min_element(theta.begin(), theta.end());
  std::vector<std::uint8_t> is_covered(theta.size(), 0);
  for (index s : covered)
    is_covered[static_cast<std::size_t>(s)] = 1;

  std::vector<cost> delta(theta.size(), 0.0);
  bool anchor_covered = false;
  for (index s : covered) {
    if (s == anchor)
      anchor_covered = true;
    else
      delta[static_cast<std::size_t>(s)] = m0 - theta[static_cast<std::size_t>(s)];
  }
  if (anchor_covered) {
    cost cap = infinite_cost;
    if (covered.size() >= 2)
      cap = m0;
    for (index s = 0; s < static_cast<index>(theta.size()); ++s)
      if (s != anchor && !is_covered[static_cast<std::size_t>(s)])
        cap = std::min(cap, theta[static_cast<std::size_t>(s)]);
    delta[static_cast<std::size_t>(anchor)] = cap == infinite_cost ? 0.0 : cap - m0;
  }
  return delta;
}

bool simplex_covered_coordinates(const FactorGraph& fg, index factor,
                                 std::span<const index> targets, std::vector<index>& covered,
                                 std::vector<std::vector<index>>& rows_to_coords)
{
  covered.clear();
  rows_to_coords.clear();
  std::set<index> seen;
  for (index e : targets) {
    const auto& edge = fg.edge(e);
    const bool first = edge.i == factor;
    const auto shape = edge.shape(first);
    if (shape != ProjectionShape::identity && shape != ProjectionShape::single_coord &&
        shape != ProjectionShape::coord_subset)
      return false;
    std::vector<index> coords(static_cast<std::size_t>(edge.message_dim), -1);
    for (const auto& [k, s] : edge.proj(first).entries)
      coords[static_cast<std::size_t>(k)] = s;
    for (index s : coords) {
      if (s < 0 || !seen.insert(s).second)
        return false; // overlapping rows, leave it to the generic maximizer
      covered.push_back(s);
    }
    rows_to_coords.push_back(std::move(coords));
  }
  return true;
}

MessageUpdate closed_form_update(const FactorGraph& fg, const DualVariables& phi, index factor,
                                 std::span<const index> targets, bool& handled)
{
  handled = true;
  const auto& f = fg.factor(factor);
  const auto theta = reparametrized_cost(fg, phi, factor);

  MessageUpdate upd;
  upd.factor = factor;
  upd.target_edges.assign(targets.begin(), targets.end());

  switch (f.domain.kind) {
    case FactorKind::simplex: {
      std::vector<index> covered;
      std::vector<std::vector<index>> rows_to_coords;
      if (!simplex_covered_coordinates(fg, factor, targets, covered, rows_to_coords))
        break;
      const auto anchor = min_oracle_theta(f.domain, theta);
      upd.anchor_config = anchor.config;
      std::vector<cost> deltas;
      if (targets.size() == 1 && rows_to_coords[0].size() == theta.size() &&
          fg.edge(targets[0]).shape(fg.edge(targets[0]).i == factor) == ProjectionShape::identity) {
        deltas = mrf::node_to_edge_message(theta);
      } else if (targets.size() == 1 && rows_to_coords[0].size() == 1) {
        deltas.assign(theta.size(), 0.0);
        const index coord = rows_to_coords[0][0];
        deltas[static_cast<std::size_t>(coord)] = gm::label_factor_message(theta, coord);
      } else {
        deltas = simplex_subset_deltas(theta, covered, static_cast<index>(anchor.config));
      }
      for (std::size_t t = 0; t < targets.size(); ++t) {
        std::vector<cost> d(rows_to_coords[t].size());
        for (std::size_t k = 0; k < d.size(); ++k)
          d[k] = deltas[static_cast<std::size_t>(rows_to_coords[t][k])];
        upd.deltas.push_back(std::move(d));
      }
      upd.sign_pattern.reserve(targets.size());
      for (index e : targets)
        upd.sign_pattern.push_back(sign_pattern_of(fg, factor, e, upd.anchor_config));
      return upd;
    }

    case FactorKind::pairwise_table: {
      if (targets.size() != 1)
        break;
      const auto& edge = fg.edge(targets[0]);
      const bool first = edge.i == factor;
      const auto shape = edge.shape(first);
      if (shape != ProjectionShape::table_rows && shape != ProjectionShape::table_cols)
        break;
      const auto anchor = min_oracle_theta(f.domain, theta);
      upd.anchor_config = anchor.config;
      upd.deltas.push_back(mrf::edge_to_node_message(theta, f.domain.shape0, f.domain.shape1,
                                                     shape == ProjectionShape::table_rows));
      upd.sign_pattern.push_back(sign_pattern_of(fg, factor, targets[0], upd.anchor_config));
      return upd;
    }

    case FactorKind::cut_edge: {
      if (targets.size() != 1)
        break;
      const auto& edge = fg.edge(targets[0]);
      const bool first = edge.i == factor;
      if (edge.shape(first) != ProjectionShape::single_coord)
        break;
      upd.anchor_config = theta[0] < 0 ? 1 : 0;
      upd.deltas.push_back({mc::cut_edge_message(theta[0])});
      upd.sign_pattern.push_back(sign_pattern_of(fg, factor, targets[0], upd.anchor_config));
      return upd;
    }

    case FactorKind::cycle_triangle: {
      if (targets.size() != 1)
        break;
      const auto& edge = fg.edge(targets[0]);
      const bool first = edge.i == factor;
      if (edge.shape(first) != ProjectionShape::single_coord)
        break;
      const index coord = edge.proj(first).entries[0].second;
      const std::array<cost, 3> costs = {theta[0], theta[1], theta[2]};
      const auto anchor = mc::cycle_min_oracle(costs);
      upd.anchor_config = anchor.config;
      upd.deltas.push_back({mc::cycle_to_edge_message(costs, coord)});
      upd.sign_pattern.push_back(sign_pattern_of(fg, factor, targets[0], upd.anchor_config));
      return upd;
    }

    case FactorKind::generic:
      break;
  }
  handled = false;
  return upd;
}

} // namespace

MessageUpdate maximize_message_generic(const FactorGraph& fg, const DualVariables& phi, index factor,
                                       std::span<const index> targets)
{
  const auto& f = fg.factor(factor);
  const auto theta = reparametrized_cost(fg, phi, factor);
  const std::size_t n = f.domain.config_count();

  // Stacked row of each configuration across all targets; the stacked
  // projection must activate at most one row per configuration.
  std::vector<int> stacked_row(n, -1);
  std::size_t total_rows = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& edge = fg.edge(targets[t]);
    const bool first = edge.i == factor;
    if (!edge.select_one(first))
      throw solver_error("generic message maximizer requires select-one projections");
    const auto& config_rows = edge.config_rows(first);
    for (std::size_t c = 0; c < n; ++c) {
      const index k = config_rows[c];
      if (k < 0)
        continue;
      if (stacked_row[c] >= 0)
        throw solver_error("generic message maximizer requires disjoint target projections");
      stacked_row[c] = static_cast<int>(total_rows) + k;
    }
    total_rows += static_cast<std::size_t>(edge.message_dim);
  }

  std::vector<cost> config_cost(n);
  for (std::size_t c = 0; c < n; ++c)
    config_cost[c] = f.domain.config_cost(theta, c);

  std::size_t anchor = 0;
  cost m0 = config_cost[0];
  for (std::size_t c = 1; c < n; ++c)
    if (config_cost[c] < m0) {
      m0 = config_cost[c];
      anchor = c;
    }

  std::vector<cost> row_min(total_rows, infinite_cost);
  for (std::size_t c = 0; c < n; ++c)
    if (stacked_row[c] >= 0) {
      auto& m = row_min[static_cast<std::size_t>(stacked_row[c])];
      m = std::min(m, config_cost[c]);
    }

  const int anchor_row = stacked_row[anchor];
  std::vector<cost> delta(total_rows, 0.0);
  for (std::size_t r = 0; r < total_rows; ++r) {
    if (static_cast<int>(r) == anchor_row || row_min[r] == infinite_cost)
      continue;
    delta[r] = m0 - row_min[r];
  }
  if (anchor_row >= 0) {
    cost cap = infinite_cost;
    for (std::size_t c = 0; c < n; ++c) {
      if (stacked_row[c] == anchor_row)
        continue;
      const cost lowered =
          config_cost[c] + (stacked_row[c] >= 0 ? delta[static_cast<std::size_t>(stacked_row[c])] : 0.0);
      cap = std::min(cap, lowered);
    }
    // cap - m0 can round to a tiny negative when the lowered costs hit m0
    delta[static_cast<std::size_t>(anchor_row)] =
        cap == infinite_cost ? 0.0 : std::max(0.0, cap - m0);
  }

  MessageUpdate upd;
  upd.factor = factor;
  upd.target_edges.assign(targets.begin(), targets.end());
  upd.anchor_config = anchor;
  std::size_t base = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& edge = fg.edge(targets[t]);
    std::vector<cost> d(static_cast<std::size_t>(edge.message_dim));
    for (index k = 0; k < edge.message_dim; ++k)
      d[static_cast<std::size_t>(k)] = delta[base + static_cast<std::size_t>(k)];
    upd.deltas.push_back(std::move(d));
    upd.sign_pattern.push_back(sign_pattern_of(fg, factor, targets[t], anchor));
    base += static_cast<std::size_t>(edge.message_dim);
  }
  return upd;
}

MessageUpdate maximize_message(const FactorGraph& fg, const DualVariables& phi, index factor,
                               std::span<const index> targets)
{
  for (index e : targets) {
    const auto& edge = fg.edge(e);
    if (edge.i != factor && edge.j != factor)
      throw solver_error("message target is not incident to the factor");
  }
  bool handled = false;
  MessageUpdate upd = closed_form_update(fg, phi, factor, targets, handled);
  if (!handled)
    upd = maximize_message_generic(fg, phi, factor, targets);
#ifndef NDEBUG
  assert_admissible(fg, phi, upd);
#endif
  return upd;
}

MessageUpdate maximize_message(const FactorGraph& fg, const DualVariables& phi, index factor,
                               std::span<const index> targets, std::span<const cost> direction)
{
  const auto anchor = min_oracle(fg, phi, factor);
  validate_direction(fg.factor(factor).domain, anchor.config, direction);
  return maximize_message(fg, phi, factor, targets);
}

void apply_update(const FactorGraph& fg, DualVariables& phi, const MessageUpdate& update, cost omega)
{
  if (omega < 0 || omega > 1)
    throw solver_error("update weight must lie in [0, 1]");
  for (std::size_t t = 0; t < update.target_edges.size(); ++t) {
    const index e = update.target_edges[t];
    const auto& edge = fg.edge(e);
    const cost sign = edge.i == update.factor ? 1.0 : -1.0;
    auto values = phi.edge(e);
    for (index k = 0; k < edge.message_dim; ++k)
      values[static_cast<std::size_t>(k)] += sign * omega * update.deltas[t][static_cast<std::size_t>(k)];
  }
}

void receive_messages(const FactorGraph& fg, DualVariables& phi, index factor,
                      std::span<const index> receive_edges, const MessageObserver& observer)
{
  for (index e : receive_edges) {
    const auto& edge = fg.edge(e);
    if (edge.i != factor && edge.j != factor)
      throw solver_error("receive edge is not incident to the factor");
    const index sender = edge.i == factor ? edge.j : edge.i;
    const std::array<index, 1> target = {e};
    const auto upd = maximize_message(fg, phi, sender, target);
    if (observer)
      observer(fg, phi, upd);
    apply_update(fg, phi, upd, 1.0);
  }
}

void send_messages(const FactorGraph& fg, DualVariables& phi, index factor,
                   std::span<const std::vector<index>> blocks, std::span<const cost> weights,
                   const MessageObserver& observer)
{
  if (blocks.size() != weights.size())
    throw solver_error("send blocks and weights differ in size");
  cost total = 0;
  for (cost w : weights) {
    if (w < 0)
      throw solver_error("send weights must be nonnegative");
    total += w;
  }
  if (total > 1.0 + 1e-12)
    throw solver_error("send weights sum above 1");
  std::set<index> seen;
  for (const auto& block : blocks)
    for (index e : block)
      if (!seen.insert(e).second)
        throw solver_error("send partition blocks must be disjoint");

  // Snapshot-read: all updates computed from the same phi, then applied.
  std::vector<MessageUpdate> updates;
  updates.reserve(blocks.size());
  for (const auto& block : blocks)
    updates.push_back(maximize_message(fg, phi, factor, block));
  if (observer)
    for (const auto& update : updates)
      observer(fg, phi, update);
  for (std::size_t b = 0; b < updates.size(); ++b)
    apply_update(fg, phi, updates[b], weights[b]);
}

void validate_schedule(const FactorGraph& fg, const Schedule& schedule)
{
  const auto check = [&](const std::vector<VisitRecord>& records) {
    for (const auto& rec : records) {
      if (rec.factor < 0 || rec.factor >= static_cast<index>(fg.factor_count()))
        throw solver_error("schedule references unknown factor");
      std::set<index> incident;
      for (const auto& inc : fg.incident(rec.factor))
        incident.insert(inc.edge);
      for (index e : rec.receive)
        if (!incident.count(e))
          throw solver_error("schedule receive edge not incident to factor");
      if (rec.blocks.size() != rec.weights.size())
        throw solver_error("schedule blocks and weights differ in size");
      cost total = 0;
      std::set<index> seen;
      for (const auto& block : rec.blocks)
        for (index e : block) {
          if (!incident.count(e))
            throw solver_error("schedule send edge not incident to factor");
          if (!seen.insert(e).second)
            throw solver_error("schedule send blocks must be disjoint");
        }
      for (cost w : rec.weights) {
        if (w < 0)
          throw solver_error("schedule weights must be nonnegative");
        total += w;
      }
      if (total > 1.0 + 1e-12)
        throw solver_error("schedule weights sum above 1");
    }
  };
  check(schedule.forward);
  check(schedule.backward);
}

cost run_iteration(const FactorGraph& fg, DualVariables& phi, Schedule& schedule,
                   const PreVisitHook& pre_visit, const MessageObserver& observer)
{
  const bool backward = schedule.next_backward;
  for (const auto& rec : schedule.current()) {
    if (pre_visit)
      pre_visit(rec, backward);
    receive_messages(fg, phi, rec.factor, rec.receive, observer);
    send_messages(fg, phi, rec.factor, rec.blocks, rec.weights, observer);
  }
  if (schedule.reverse_each_iteration)
    schedule.next_backward = !schedule.next_backward;
  return dual_lower_bound(fg, phi);
}

MinimizerSet enumerate_minimizers(const FactorGraph& fg, const DualVariables& phi, index i)
{
  const auto& domain = fg.factor(i).domain;
  const auto theta = reparametrized_cost(fg, phi, i);
  const std::size_t n = domain.config_count();
  MinimizerSet set;
  set.value = infinite_cost;
  for (std::size_t c = 0; c < n; ++c)
    set.value = std::min(set.value, domain.config_cost(theta, c));
  for (std::size_t c = 0; c < n; ++c)
    if (domain.config_cost(theta, c) <= set.value + 1e-9)
      set.configs.push_back(c);
  return set;
}

MarginalConsistencyReport marginal_consistency(const FactorGraph& fg, const DualVariables& phi)
{
  std::vector<MinimizerSet> minimizers;
  minimizers.reserve(fg.factor_count());
  for (index i = 0; i < static_cast<index>(fg.factor_count()); ++i)
    minimizers.push_back(enumerate_minimizers(fg, phi, i));

  MarginalConsistencyReport report;
  report.edge_consistent.assign(fg.edge_count(), 1);
  for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e) {
    const auto& edge = fg.edge(e);
    std::set<std::vector<std::uint8_t>> images_i, images_j;
    for (std::size_t c : minimizers[static_cast<std::size_t>(edge.i)].configs)
      images_i.insert(edge.proj_i.apply_config(fg.factor(edge.i).domain, c));
    for (std::size_t c : minimizers[static_cast<std::size_t>(edge.j)].configs)
      images_j.insert(edge.proj_j.apply_config(fg.factor(edge.j).domain, c));
    if (images_i != images_j) {
      report.consistent = false;
      report.edge_consistent[static_cast<std::size_t>(e)] = 0;
    }
  }
  return report;
}

} // namespace dualmp
