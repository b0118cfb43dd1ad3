#ifndef DUALMP_TYPES_HPP
#define DUALMP_TYPES_HPP

#include <cstdint>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dualmp {

using cost = double;
using index = std::int32_t;

constexpr cost infinite_cost = std::numeric_limits<cost>::infinity();

// Slack used by all monotonicity checks: absolute 1e-9 scaled by max(1, |value|).
inline cost monotone_slack(cost value)
{
  return 1e-9 * std::max(1.0, std::abs(value));
}

// Raised when an instance violates a structural invariant at build time.
struct invalid_instance : std::runtime_error {
  explicit invalid_instance(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a solver primitive is called outside its contract.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dualmp

#endif
