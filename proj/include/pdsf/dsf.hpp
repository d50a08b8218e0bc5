#pragma once

#include <optional>
#include <unordered_map>
#include <vector>

#include "pdsf/field.hpp"

// Single-path DSF navigation: the h-step (nearest field point in L1 with
// strictly higher d-th coordinate), path tracing, and the finite-window forest.

namespace pdsf {

// Worst-case L1 step length: the point of the site one level above the nearest
// up-site always qualifies, at transverse distance <= (d-1)(1/2 + rho) and
// vertical distance <= 2 + rho.
double max_step_length(int dimension, double half_width);

// Nearest lattice site to x on level floor(x(d)) + 1 (resp. floor(x(d))).
// Ties resolve toward the smaller coordinate.
LatticeSite up_site(const Vec& x, int dim);
LatticeSite down_site(const Vec& x, int dim);

SitePoint h_step(const FieldConfig& cfg, const Vec& x);

// Memoizing wrapper keyed by source site, for workloads that revisit vertices
// (forest builds, multi-path tracing with coalescence).
class EdgeCache {
 public:
  explicit EdgeCache(const FieldConfig& cfg) : cfg_(&cfg) {}
  const SitePoint& next(const SitePoint& from);
  std::size_t size() const { return map_.size(); }

 private:
  const FieldConfig* cfg_;
  std::unordered_map<LatticeSite, SitePoint, LatticeSiteHash> map_;
};

// Piecewise-linear path through successive h-steps. The start knot is part of
// the path function (paths from field points start at the point itself); the
// vertex list holds the field points h^1(start), h^2(start), ...
struct DsfPath {
  int dim = 2;
  Vec start{};
  std::vector<SitePoint> vertices;

  double start_height() const { return start[dim - 1]; }
  double end_height() const {
    return vertices.empty() ? start_height() : vertices.back().position[dim - 1];
  }
};

struct StopRule {
  std::optional<double> height_above;   // stop once a vertex exceeds this height
  std::optional<std::int64_t> steps;    // stop after this many h-steps
};

DsfPath trace_path(const FieldConfig& cfg, const Vec& start, const StopRule& stop);
// Path from a field point: start knot is the vertex itself.
DsfPath trace_path_from(const FieldConfig& cfg, const SitePoint& origin, const StopRule& stop,
                        EdgeCache* cache = nullptr);

// Transverse coordinates of the path at height t (linear interpolation).
// Throws std::domain_error for t below the starting height; clamps to the last
// vertex above the traced range.
Vec path_value(const DsfPath& path, double t);

struct ForestEdge {
  SitePoint from;
  SitePoint to;
};

std::vector<ForestEdge> build_forest(const FieldConfig& cfg, const Box& window);

// Non-crossing test for d=2 paths: no two heights s1, s2 in the common domain
// with strictly opposite-sign differences. Checked at all vertex heights.
bool paths_cross(const DsfPath& a, const DsfPath& b);

}  // namespace pdsf
