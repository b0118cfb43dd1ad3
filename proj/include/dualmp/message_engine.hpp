#ifndef DUALMP_MESSAGE_ENGINE_HPP
#define DUALMP_MESSAGE_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dualmp/factor_graph.hpp"

namespace dualmp {

/// A candidate dual step attached to one factor and a set of target edges.
/// Sign pattern: delta(k) >= 0 where the anchor's projection has a 1 and
/// delta(k) <= 0 where it has a 0; the anchor stays a factor minimizer after
/// the full step is applied.
struct MessageUpdate {
  index factor = -1;
  std::vector<index> target_edges;
  std::vector<std::vector<cost>> deltas;               // per target edge
  std::size_t anchor_config = 0;
  std::vector<std::vector<std::uint8_t>> sign_pattern; // nu per target edge
};

// Direction vector for the update maximization: positive on the anchor's
// support, negative elsewhere (strict signs).
std::vector<cost> default_direction(const FactorDomain& domain, std::size_t anchor_config);
void validate_direction(const FactorDomain& domain, std::size_t anchor_config,
                        std::span<const cost> direction);

struct MinResult {
  std::size_t config = 0;
  cost value = 0;
};

// Minimizing configuration under the reparametrized costs; ties broken by the
// first configuration in canonical enumeration order.
MinResult min_oracle(const FactorGraph& fg, const DualVariables& phi, index i);
MinResult min_oracle_theta(const FactorDomain& domain, std::span<const cost> theta);

/// Maximal admissible update from `factor` to `targets`, computed from the
/// current reparametrization. Dispatches to closed forms for the built-in
/// factor kinds and falls back to the enumeration-based maximizer.
MessageUpdate maximize_message(const FactorGraph& fg, const DualVariables& phi, index factor,
                               std::span<const index> targets);

// Same, with an explicit direction vector. The direction must satisfy the
// strict sign condition for the current anchor; the produced update is the
// canonical one, maximal along the default unit direction.
MessageUpdate maximize_message(const FactorGraph& fg, const DualVariables& phi, index factor,
                               std::span<const index> targets, std::span<const cost> direction);

// Enumeration-based maximizer. Requires the stacked target projections to
// activate at most one row per configuration. Serves as the independent
// oracle for the closed forms.
MessageUpdate maximize_message_generic(const FactorGraph& fg, const DualVariables& phi, index factor,
                                       std::span<const index> targets);

// Shifts the incident dual vectors by omega * delta. Antisymmetry is kept by
// the single-copy storage.
void apply_update(const FactorGraph& fg, DualVariables& phi, const MessageUpdate& update, cost omega);

// Invoked with every produced update before it is applied.
using MessageObserver =
    std::function<void(const FactorGraph&, const DualVariables&, const MessageUpdate&)>;

// For each edge in order: maximize the message from the factor across the
// edge towards `factor` and apply it with weight 1.
void receive_messages(const FactorGraph& fg, DualVariables& phi, index factor,
                      std::span<const index> receive_edges, const MessageObserver& observer = {});

// All block updates are computed from the same phi, then applied with their
// weights. Blocks must be disjoint and the weights must not sum above 1.
void send_messages(const FactorGraph& fg, DualVariables& phi, index factor,
                   std::span<const std::vector<index>> blocks, std::span<const cost> weights,
                   const MessageObserver& observer = {});

struct VisitRecord {
  index factor = -1;
  std::vector<index> receive;             // edge ids
  std::vector<std::vector<index>> blocks; // send partition, edge ids
  std::vector<cost> weights;              // one per block
};

/// Ordered visit list with per-factor receive sets, send partitions and
/// weights. Holds one list per direction; the active direction flips after
/// every iteration when reversal is on.
struct Schedule {
  std::vector<VisitRecord> forward;
  std::vector<VisitRecord> backward;
  bool reverse_each_iteration = true;
  bool next_backward = false;

  const std::vector<VisitRecord>& current() const { return next_backward ? backward : forward; }
};

void validate_schedule(const FactorGraph& fg, const Schedule& schedule);

// Called right before a factor's receive step; carries the pass direction.
using PreVisitHook = std::function<void(const VisitRecord&, bool backward)>;

// One pass over the schedule's current visit list, receive then send per
// record. Returns the recomputed dual lower bound and flips the schedule
// direction per its reversal policy.
cost run_iteration(const FactorGraph& fg, DualVariables& phi, Schedule& schedule,
                   const PreVisitHook& pre_visit = {}, const MessageObserver& observer = {});

struct MinimizerSet {
  std::vector<std::size_t> configs; // all configs within 1e-9 of the minimum
  cost value = 0;
};

MinimizerSet enumerate_minimizers(const FactorGraph& fg, const DualVariables& phi, index i);

struct MarginalConsistencyReport {
  bool consistent = true;
  std::vector<std::uint8_t> edge_consistent; // per edge
};

// True iff for every edge the projected images of the two full minimizer
// sets coincide.
MarginalConsistencyReport marginal_consistency(const FactorGraph& fg, const DualVariables& phi);

struct SolveOptions {
  int max_iterations = 1000;
  double tolerance = 1e-8;  // relative per-iteration improvement stop
  int round_interval = 10;  // rounding cadence, in iterations
  int tighten_interval = 20;
  int separation_budget = -1; // <0: number of instance edges
};

} // namespace dualmp

#endif
