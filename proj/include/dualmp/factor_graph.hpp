#ifndef DUALMP_FACTOR_GRAPH_HPP
#define DUALMP_FACTOR_GRAPH_HPP

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dualmp/types.hpp"

namespace dualmp {

enum class FactorKind : std::uint8_t {
  generic,        // explicitly listed configurations
  simplex,        // unit vectors over dim coordinates (CRF nodes, label factors)
  pairwise_table, // unit vectors over a rows x cols table (CRF edges)
  cut_edge,       // dim 1, configurations {(0),(1)}
  cycle_triangle, // dim 3, the five configurations with 0 or >=2 ones
};

/// A factor's configuration set: a finite family of 0/1 vectors of length dim.
/// Built-in kinds enumerate implicitly; generic factors store the list.
struct FactorDomain {
  FactorKind kind = FactorKind::generic;
  index dim = 0;
  index shape0 = 0, shape1 = 0;                  // pairwise_table only
  std::vector<std::vector<std::uint8_t>> configs; // generic only

  static FactorDomain simplex(index dim);
  static FactorDomain pairwise_table(index rows, index cols);
  static FactorDomain cut_edge();
  static FactorDomain cycle_triangle();
  static FactorDomain explicit_configs(index dim, std::vector<std::vector<std::uint8_t>> configs);

  std::size_t config_count() const;
  bool config_bit(std::size_t config, index coord) const;
  // Coordinates set to 1 in the given configuration, ascending.
  std::vector<index> config_support(std::size_t config) const;
  cost config_cost(std::span<const cost> theta, std::size_t config) const;
};

/// Sparse 0/1 matrix, stored as (row, column) entries of the ones.
struct Projection {
  index rows = 0;
  std::vector<std::pair<index, index>> entries;

  static Projection identity(index n);
  static Projection single_coordinate(index coord);
  // Dense 0/1 matrix accepted at the boundary; converted to entries.
  static Projection from_dense(const std::vector<std::vector<std::uint8_t>>& matrix);

  std::vector<std::uint8_t> apply_config(const FactorDomain& domain, std::size_t config) const;
};

struct FactorSpec {
  FactorDomain domain;
  std::vector<cost> costs; // length domain.dim
};

struct CouplingSpec {
  index i = -1, j = -1;
  Projection proj_i, proj_j; // both with the same row count K
};

// Classification of a coupling-side projection, used for message dispatch.
enum class ProjectionShape : std::uint8_t {
  identity,     // K == dim, entry (s, s) for every s
  single_coord, // K == 1, one entry (0, t)
  table_rows,   // pairwise_table factor, row k selects entries (k, k*cols + j)
  table_cols,   // pairwise_table factor, row k selects entries (k, i*cols + k)
  coord_subset, // each row selects exactly one coordinate, rows distinct
  general,
};

struct CouplingEdge {
  index i = -1, j = -1; // factor ids, i < j; the stored dual direction is i -> j
  index message_dim = 0;
  Projection proj_i, proj_j;
  ProjectionShape shape_i = ProjectionShape::general;
  ProjectionShape shape_j = ProjectionShape::general;
  // Per configuration of the respective factor: the single row its projection
  // activates, or -1. Only meaningful when the side is select-one.
  bool select_one_i = false, select_one_j = false;
  std::vector<index> config_row_i, config_row_j;

  const Projection& proj(bool first_side) const { return first_side ? proj_i : proj_j; }
  ProjectionShape shape(bool first_side) const { return first_side ? shape_i : shape_j; }
  bool select_one(bool first_side) const { return first_side ? select_one_i : select_one_j; }
  const std::vector<index>& config_rows(bool first_side) const
  {
    return first_side ? config_row_i : config_row_j;
  }
};

struct Factor {
  FactorDomain domain;
  std::vector<cost> costs;
};

struct IncidentEdge {
  index edge = -1;
  bool first_side = false; // true when this factor is the edge's i endpoint
};

/// Factors with enumerable 0/1 configuration sets plus coupling edges carrying
/// 0/1 projection maps. Immutable after build.
class FactorGraph {
public:
  FactorGraph() = default;

  std::size_t factor_count() const { return factors_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const Factor& factor(index i) const { return factors_[static_cast<std::size_t>(i)]; }
  const CouplingEdge& edge(index e) const { return edges_[static_cast<std::size_t>(e)]; }
  std::span<const IncidentEdge> incident(index i) const
  {
    return adjacency_[static_cast<std::size_t>(i)];
  }
  // Incident edge ids in adjacency order; the factor's neighborhood.
  std::vector<index> incident_edge_ids(index i) const;

private:
  friend FactorGraph build_factor_graph(std::vector<FactorSpec>, std::vector<CouplingSpec>);

  std::vector<Factor> factors_;
  std::vector<CouplingEdge> edges_;
  std::vector<std::vector<IncidentEdge>> adjacency_;
};

/// Validates the specs (configuration sets, projection condition, duplicate
/// edges) and assembles the graph. Edges are normalized so that i < j.
FactorGraph build_factor_graph(std::vector<FactorSpec> factors, std::vector<CouplingSpec> couplings);

/// One real vector per coupling edge, stored for the direction i -> j (i < j).
/// The reverse direction is structurally the negation.
class DualVariables {
public:
  DualVariables() = default;
  explicit DualVariables(const FactorGraph& fg);

  std::span<cost> edge(index e) { return phi_[static_cast<std::size_t>(e)]; }
  std::span<const cost> edge(index e) const { return phi_[static_cast<std::size_t>(e)]; }

  // The vector as seen from one endpoint: phi_(j,i) == -phi_(i,j).
  cost directed(index e, bool from_first_side, index k) const
  {
    const cost v = phi_[static_cast<std::size_t>(e)][static_cast<std::size_t>(k)];
    return from_first_side ? v : -v;
  }

  std::size_t edge_count() const { return phi_.size(); }

private:
  std::vector<std::vector<cost>> phi_;
};

/// Per-factor chosen configuration, indexed into the factor's enumeration.
using Labeling = std::vector<std::size_t>;

// theta_i plus the transposed-projection images of all incident dual vectors.
std::vector<cost> reparametrized_cost(const FactorGraph& fg, const DualVariables& phi, index i);

cost factor_min_value(const FactorGraph& fg, std::span<const cost> theta, index i);

// Sum over factors of the minimal reparametrized configuration cost.
cost dual_lower_bound(const FactorGraph& fg, const DualVariables& phi);

// Sum of per-factor reparametrized costs of the chosen configurations. For
// coupling-consistent labelings the value does not depend on phi.
cost labeling_cost(const FactorGraph& fg, const DualVariables& phi, const Labeling& labeling);

struct ConsistencyReport {
  bool consistent = true;
  std::vector<index> violated_edges;
};

// True iff the projections of the chosen configurations agree on every edge.
ConsistencyReport check_coupling_consistency(const FactorGraph& fg, const Labeling& labeling);

} // namespace dualmp

#endif
