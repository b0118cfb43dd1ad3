#ifndef DUALMP_TRACE_HPP
#define DUALMP_TRACE_HPP

#include <optional>

#include "dualmp/types.hpp"

namespace dualmp {

enum class RecordEvent { iterate, tighten, round };

/// One row of a solve's convergence log. The dual bound is non-decreasing
/// across the records of one message-passing solve.
struct ConvergenceRecord {
  int iteration = 0;
  long long elapsed_ms = 0;
  cost dual_bound = 0;
  std::optional<cost> best_primal;
  RecordEvent event = RecordEvent::iterate;
};

} // namespace dualmp

#endif
