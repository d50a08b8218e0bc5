#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pdsf/dsf.hpp"

// Lightweight multi-path tracing on a fixed field realization: lockstep
// advancement by height with vertex-identity merge detection. This is the
// workhorse for coalescence statistics; it carries no history bookkeeping.

namespace pdsf {

struct PairCoalescence {
  bool coalesced = false;
  double height = 0.0;        // d-th coordinate of the first shared vertex
  std::int64_t steps = 0;     // total h-steps spent
  double reached_height = 0.0;
};

// Traces the DSF paths from two lattice starts until they share a vertex, the
// minimum path height exceeds height_cap, or the step budget runs out.
PairCoalescence trace_pair_coalescence(const FieldConfig& cfg, const LatticeSite& u,
                                       const LatticeSite& v, double height_cap,
                                       std::int64_t step_cap);

struct MultiCoalescence {
  bool all_coalesced = false;
  double last_merge_height = 0.0;  // height at which the final merge happened
  int groups_left = 1;
  std::int64_t steps = 0;
};

MultiCoalescence trace_multi_coalescence(const FieldConfig& cfg,
                                         const std::vector<LatticeSite>& starts,
                                         double height_cap, std::int64_t step_cap);

// Transverse first coordinate of the path from `start`, linearly interpolated
// at the given heights (which must be increasing and above the start).
std::vector<double> transverse_at_heights(const FieldConfig& cfg, const Vec& start,
                                          const std::vector<double>& heights);

}  // namespace pdsf
