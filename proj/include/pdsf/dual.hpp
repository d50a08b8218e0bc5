#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "pdsf/dsf.hpp"

// The d=2 dual forest: for every primal vertex, the left and right dual
// vertices are midpoints to the flanking paths at the vertex's height; dual
// ancestors thread downward between primal paths.

namespace pdsf {

struct MarginExhausted : std::runtime_error {
  explicit MarginExhausted(const std::string& what) : std::runtime_error(what) {}
};

enum class Side { kLeft, kRight };

// Forest edges near a window, bucketed by integer level, answering "nearest
// path strictly left/right of (x,t) started strictly before t" queries.
class PathIndex {
 public:
  PathIndex(const FieldConfig& cfg, const Box& window, double margin);

  struct Crossing {
    SitePoint from;  // the vertex (x,t)_r or (x,t)_l
    SitePoint to;
    double value = 0.0;  // the flanking path's position at the query height
  };

  // Throws MarginExhausted when the flank cannot be certified inside the margin.
  Crossing flank(double x, double t, Side side) const;

  const Box& window() const { return window_; }
  double margin() const { return margin_; }

 private:
  Box window_;
  double margin_;
  double safe_lo_ = 0.0, safe_hi_ = 0.0;  // certified query band (transverse)
  std::int64_t level_lo_ = 0;
  std::vector<std::vector<std::int32_t>> buckets_;  // per level, indices into edges_
  std::vector<ForestEdge> edges_;
};

// The flanking path at (x,t): traced from the crossing vertex up to the window top.
DsfPath nearest_path(const FieldConfig& cfg, const Vec& xt, Side side, const Box& window,
                     double margin);

struct DualVertex {
  Vec position{};     // (y, s); s equals the parent's height
  SitePoint parent;   // primal vertex this dual vertex flanks
  Side side = Side::kLeft;
};

struct DualEdge {
  std::int32_t from = 0;  // index into DualForest::vertices
  Vec to_position{};
  LatticeSite to_parent;
  Side to_side = Side::kLeft;
};

struct DualForest {
  Box window{};
  double margin = 0.0;
  std::vector<DualVertex> vertices;
  std::vector<DualEdge> edges;  // one per vertex, strictly descending
  std::shared_ptr<const PathIndex> index;
};

DualForest build_dual(const FieldConfig& cfg, const Box& window, double margin);

// Dual (backward) path: heights strictly decrease along the knots.
struct DualPath {
  std::vector<Vec> knots;
};

DualPath trace_dual_path(const FieldConfig& cfg, const PathIndex& index, const DualVertex& start,
                         double bottom);

// True if the primal path and the dual path take strictly opposite sides of
// each other anywhere on their common height interval.
bool dual_primal_cross(const DsfPath& primal, const DualPath& dual);

struct BiInfiniteProbe {
  int traversing_components = 0;  // distinct dual trees running top to bottom
  int top_band_vertices = 0;
};

// Traces every dual vertex in the top band of the window downward; counts how
// many distinct components exit below the window bottom.
BiInfiniteProbe probe_bi_infinite(const FieldConfig& cfg, const DualForest& forest);

}  // namespace pdsf
