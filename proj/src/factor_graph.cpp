#include "dualmp/factor_graph.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <set>
#include <sstream>

namespace dualmp {

namespace {

const std::array<std::array<std::uint8_t, 3>, 5> cycle_configs = {{
    {0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1},
}};

std::string describe_factor(index i)
{
  std::ostringstream s;
  s << "factor " << i;
  return s.str();
}

} // namespace

FactorDomain FactorDomain::simplex(index dim)
{
  if (dim <= 0)
    throw invalid_instance("simplex factor needs positive dimension");
  FactorDomain d;
  d.kind = FactorKind::simplex;
  d.dim = dim;
  return d;
}

FactorDomain FactorDomain::pairwise_table(index rows, index cols)
{
  if (rows <= 0 || cols <= 0)
    throw invalid_instance("pairwise table needs positive shape");
  FactorDomain d;
  d.kind = FactorKind::pairwise_table;
  d.dim = rows * cols;
  d.shape0 = rows;
  d.shape1 = cols;
  return d;
}

FactorDomain FactorDomain::cut_edge()
{
  FactorDomain d;
  d.kind = FactorKind::cut_edge;
  d.dim = 1;
  return d;
}

FactorDomain FactorDomain::cycle_triangle()
{
  FactorDomain d;
  d.kind = FactorKind::cycle_triangle;
  d.dim = 3;
  return d;
}

FactorDomain FactorDomain::explicit_configs(index dim, std::vector<std::vector<std::uint8_t>> configs)
{
  FactorDomain d;
  d.kind = FactorKind::generic;
  d.dim = dim;
  d.configs = std::move(configs);
  if (d.dim <= 0)
    throw invalid_instance("factor needs positive dimension");
  if (d.configs.empty())
    throw invalid_instance("factor needs a non-empty configuration set");
  std::set<std::vector<std::uint8_t>> seen;
  for (const auto& c : d.configs) {
    if (static_cast<index>(c.size()) != d.dim)
      throw invalid_instance("configuration length does not match factor dimension");
    for (auto v : c)
      if (v != 0 && v != 1)
        throw invalid_instance("non-binary config");
    if (!seen.insert(c).second)
      throw invalid_instance("duplicate configuration");
  }
  return d;
}

std::size_t FactorDomain::config_count() const
{
  switch (kind) {
    case FactorKind::simplex:
    case FactorKind::pairwise_table: return static_cast<std::size_t>(dim);
    case FactorKind::cut_edge: return 2;
    case FactorKind::cycle_triangle: return 5;
    case FactorKind::generic: return configs.size();
  }
  return 0;
}

bool FactorDomain::config_bit(std::size_t config, index coord) const
{
  switch (kind) {
    case FactorKind::simplex:
    case FactorKind::pairwise_table: return static_cast<std::size_t>(coord) == config;
    case FactorKind::cut_edge: return config == 1 && coord == 0;
    case FactorKind::cycle_triangle: return cycle_configs[config][static_cast<std::size_t>(coord)] != 0;
    case FactorKind::generic: return configs[config][static_cast<std::size_t>(coord)] != 0;
  }
  return false;
}

std::vector<index> FactorDomain::config_support(std::size_t config) const
{
  std::vector<index> support;
  switch (kind) {
    case FactorKind::simplex:
    case FactorKind::pairwise_table:
      support.push_back(static_cast<index>(config));
      break;
    case FactorKind::cut_edge:
      if (config == 1)
        support.push_back(0);
      break;
    case FactorKind::cycle_triangle:
      for (index t = 0; t < 3; ++t)
        if (cycle_configs[config][static_cast<std::size_t>(t)])
          support.push_back(t);
      break;
    case FactorKind::generic:
      for (index t = 0; t < dim; ++t)
        if (configs[config][static_cast<std::size_t>(t)])
          support.push_back(t);
      break;
  }
  return support;
}

cost FactorDomain::config_cost(std::span<const cost> theta, std::size_t config) const
{
  switch (kind) {
    case FactorKind::simplex:
    case FactorKind::pairwise_table: return theta[config];
    case FactorKind::cut_edge: return config == 1 ? theta[0] : 0.0;
    default: break;
  }
  cost value = 0;
  for (index t : config_support(config))
    value += theta[static_cast<std::size_t>(t)];
  return value;
}

Projection Projection::identity(index n)
{
  Projection p;
  p.rows = n;
  p.entries.reserve(static_cast<std::size_t>(n));
  for (index s = 0; s < n; ++s)
    p.entries.emplace_back(s, s);
  return p;
}

Projection Projection::single_coordinate(index coord)
{
  Projection p;
  p.rows = 1;
  p.entries.emplace_back(0, coord);
  return p;
}

Projection Projection::from_dense(const std::vector<std::vector<std::uint8_t>>& matrix)
{
  Projection p;
  p.rows = static_cast<index>(matrix.size());
  for (index k = 0; k < p.rows; ++k) {
    const auto& row = matrix[static_cast<std::size_t>(k)];
    for (index s = 0; s < static_cast<index>(row.size()); ++s) {
      const auto v = row[static_cast<std::size_t>(s)];
      if (v != 0 && v != 1)
        throw invalid_instance("projection matrix must be 0/1");
      if (v)
        p.entries.emplace_back(k, s);
    }
  }
  return p;
}

std::vector<std::uint8_t> Projection::apply_config(const FactorDomain& domain, std::size_t config) const
{
  std::vector<std::uint8_t> image(static_cast<std::size_t>(rows), 0);
  for (const auto& [k, s] : entries)
    if (domain.config_bit(config, s))
      ++image[static_cast<std::size_t>(k)];
  return image;
}

namespace {

ProjectionShape classify_projection(const Projection& p, const FactorDomain& domain)
{
  if (p.rows == domain.dim && static_cast<index>(p.entries.size()) == domain.dim) {
    bool ident = true;
    for (const auto& [k, s] : p.entries)
      ident = ident && k == s;
    if (ident)
      return ProjectionShape::identity;
  }
  if (p.rows == 1 && p.entries.size() == 1)
    return ProjectionShape::single_coord;
  if (domain.kind == FactorKind::pairwise_table &&
      static_cast<index>(p.entries.size()) == domain.dim) {
    const index cols = domain.shape1;
    bool by_rows = p.rows == domain.shape0;
    bool by_cols = p.rows == domain.shape1;
    for (const auto& [k, s] : p.entries) {
      by_rows = by_rows && k == s / cols;
      by_cols = by_cols && k == s % cols;
    }
    if (by_rows)
      return ProjectionShape::table_rows;
    if (by_cols)
      return ProjectionShape::table_cols;
  }
  // Each row selecting exactly one coordinate, all coordinates distinct.
  {
    std::set<index> rows_seen, coords_seen;
    bool subset = true;
    for (const auto& [k, s] : p.entries) {
      subset = subset && rows_seen.insert(k).second && coords_seen.insert(s).second;
    }
    if (subset && static_cast<index>(p.entries.size()) == p.rows)
      return ProjectionShape::coord_subset;
  }
  return ProjectionShape::general;
}

// Checks the projection condition A*x in {0,1}^K over all configurations and
// fills the per-configuration activated row (select-one sides only).
void validate_side(const Projection& p, const FactorDomain& domain, index factor_id,
                   bool& select_one, std::vector<index>& config_rows)
{
  for (const auto& [k, s] : p.entries) {
    if (k < 0 || k >= p.rows || s < 0 || s >= domain.dim)
      throw invalid_instance("projection entry out of range on " + describe_factor(factor_id));
  }
  const std::size_t n = domain.config_count();
  select_one = true;
  config_rows.assign(n, -1);
  for (std::size_t c = 0; c < n; ++c) {
    const auto image = p.apply_config(domain, c);
    index ones = 0;
    for (index k = 0; k < p.rows; ++k) {
      const auto v = image[static_cast<std::size_t>(k)];
      if (v > 1)
        throw invalid_instance("projection condition violated on " + describe_factor(factor_id));
      if (v == 1) {
        ++ones;
        config_rows[c] = k;
      }
    }
    if (ones > 1) {
      select_one = false;
      config_rows[c] = -1;
    }
  }
  if (!select_one)
    std::fill(config_rows.begin(), config_rows.end(), -1);
}

} // namespace

FactorGraph build_factor_graph(std::vector<FactorSpec> factors, std::vector<CouplingSpec> couplings)
{
  FactorGraph fg;
  fg.factors_.reserve(factors.size());
  for (std::size_t i = 0; i < factors.size(); ++i) {
    auto& spec = factors[i];
    if (static_cast<index>(spec.costs.size()) != spec.domain.dim)
      throw invalid_instance("cost vector length does not match dimension of " +
                             describe_factor(static_cast<index>(i)));
    if (spec.domain.config_count() == 0)
      throw invalid_instance("empty configuration set on " + describe_factor(static_cast<index>(i)));
    fg.factors_.push_back(Factor{std::move(spec.domain), std::move(spec.costs)});
  }

  const index nf = static_cast<index>(fg.factors_.size());
  std::set<std::pair<index, index>> pairs;
  fg.edges_.reserve(couplings.size());
  for (auto& spec : couplings) {
    if (spec.i < 0 || spec.i >= nf || spec.j < 0 || spec.j >= nf)
      throw invalid_instance("coupling references unknown factor");
    if (spec.i == spec.j)
      throw invalid_instance("coupling must join two distinct factors");
    if (spec.proj_i.rows != spec.proj_j.rows)
      throw invalid_instance("coupling projections disagree on message dimension");

    CouplingEdge edge;
    if (spec.i < spec.j) {
      edge.i = spec.i;
      edge.j = spec.j;
      edge.proj_i = std::move(spec.proj_i);
      edge.proj_j = std::move(spec.proj_j);
    } else {
      edge.i = spec.j;
      edge.j = spec.i;
      edge.proj_i = std::move(spec.proj_j);
      edge.proj_j = std::move(spec.proj_i);
    }
    if (!pairs.insert({edge.i, edge.j}).second)
      throw invalid_instance("duplicate coupling edge");
    edge.message_dim = edge.proj_i.rows;

    const auto& fi = fg.factors_[static_cast<std::size_t>(edge.i)];
    const auto& fj = fg.factors_[static_cast<std::size_t>(edge.j)];
    validate_side(edge.proj_i, fi.domain, edge.i, edge.select_one_i, edge.config_row_i);
    validate_side(edge.proj_j, fj.domain, edge.j, edge.select_one_j, edge.config_row_j);
    edge.shape_i = classify_projection(edge.proj_i, fi.domain);
    edge.shape_j = classify_projection(edge.proj_j, fj.domain);
    fg.edges_.push_back(std::move(edge));
  }

  fg.adjacency_.assign(fg.factors_.size(), {});
  for (index e = 0; e < static_cast<index>(fg.edges_.size()); ++e) {
    const auto& edge = fg.edges_[static_cast<std::size_t>(e)];
    fg.adjacency_[static_cast<std::size_t>(edge.i)].push_back({e, true});
    fg.adjacency_[static_cast<std::size_t>(edge.j)].push_back({e, false});
  }
  return fg;
}

std::vector<index> FactorGraph::incident_edge_ids(index i) const
{
  std::vector<index> out;
  out.reserve(adjacency_[static_cast<std::size_t>(i)].size());
  for (const auto& inc : adjacency_[static_cast<std::size_t>(i)])
    out.push_back(inc.edge);
  return out;
}

DualVariables::DualVariables(const FactorGraph& fg)
{
  phi_.resize(fg.edge_count());
  for (std::size_t e = 0; e < fg.edge_count(); ++e)
    phi_[e].assign(static_cast<std::size_t>(fg.edge(static_cast<index>(e)).message_dim), 0.0);
}

std::vector<cost> reparametrized_cost(const FactorGraph& fg, const DualVariables& phi, index i)
{
  const auto& factor = fg.factor(i);
  std::vector<cost> theta(factor.costs.begin(), factor.costs.end());
  for (const auto& inc : fg.incident(i)) {
    const auto& edge = fg.edge(inc.edge);
    const auto values = phi.edge(inc.edge);
    const cost sign = inc.first_side ? 1.0 : -1.0;
    for (const auto& [k, s] : edge.proj(inc.first_side).entries)
      theta[static_cast<std::size_t>(s)] += sign * values[static_cast<std::size_t>(k)];
  }
  return theta;
}

cost factor_min_value(const FactorGraph& fg, std::span<const cost> theta, index i)
{
  const auto& domain = fg.factor(i).domain;
  switch (domain.kind) {
    case FactorKind::simplex:
    case FactorKind::pairwise_table: {
      cost best = theta[0];
      for (std::size_t s = 1; s < theta.size(); ++s)
        best = std::min(best, theta[s]);
      return best;
    }
    case FactorKind::cut_edge:
      return std::min(0.0, theta[0]);
    default: {
      const std::size_t n = domain.config_count();
      cost best = domain.config_cost(theta, 0);
      for (std::size_t c = 1; c < n; ++c)
        best = std::min(best, domain.config_cost(theta, c));
      return best;
    }
  }
}

cost dual_lower_bound(const FactorGraph& fg, const DualVariables& phi)
{
  cost bound = 0;
  for (index i = 0; i < static_cast<index>(fg.factor_count()); ++i) {
    const auto theta = reparametrized_cost(fg, phi, i);
    bound += factor_min_value(fg, theta, i);
  }
  return bound;
}

cost labeling_cost(const FactorGraph& fg, const DualVariables& phi, const Labeling& labeling)
{
  if (labeling.size() != fg.factor_count())
    throw solver_error("labeling size does not match factor count");
  cost total = 0;
  for (index i = 0; i < static_cast<index>(fg.factor_count()); ++i) {
    const auto& factor = fg.factor(i);
    const std::size_t c = labeling[static_cast<std::size_t>(i)];
    if (c >= factor.domain.config_count())
      throw solver_error("labeling config out of range on " + std::to_string(i));
    const auto theta = reparametrized_cost(fg, phi, i);
    total += factor.domain.config_cost(theta, c);
  }
  return total;
}

ConsistencyReport check_coupling_consistency(const FactorGraph& fg, const Labeling& labeling)
{
  ConsistencyReport report;
  for (index e = 0; e < static_cast<index>(fg.edge_count()); ++e) {
    const auto& edge = fg.edge(e);
    const auto image_i =
        edge.proj_i.apply_config(fg.factor(edge.i).domain, labeling[static_cast<std::size_t>(edge.i)]);
    const auto image_j =
        edge.proj_j.apply_config(fg.factor(edge.j).domain, labeling[static_cast<std::size_t>(edge.j)]);
    if (image_i != image_j) {
      report.consistent = false;
      report.violated_edges.push_back(e);
    }
  }
  return report;
}

} // namespace dualmp
