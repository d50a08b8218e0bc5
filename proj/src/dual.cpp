#include "pdsf/dual.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace pdsf {

namespace {

double edge_value_at(const ForestEdge& e, double t) {
  const double h0 = e.from.position[1];
  const double h1 = e.to.position[1];
  if (t == h1) return e.to.position[0];
  const double w = (t - h0) / (h1 - h0);
  return e.from.position[0] + w * (e.to.position[0] - e.from.position[0]);
}

struct DualKey {
  LatticeSite parent;
  Side side;
  friend bool operator==(const DualKey&, const DualKey&) = default;
};

struct DualKeyHash {
  std::size_t operator()(const DualKey& k) const noexcept {
    return LatticeSiteHash{}(k.parent) * 2 + (k.side == Side::kRight ? 1 : 0);
  }
};

}  // namespace

PathIndex::PathIndex(const FieldConfig& cfg, const Box& window, double margin)
    : window_(window), margin_(margin) {
  const double rmax = max_step_length(cfg.dimension, cfg.half_width);
  Box inflated;
  inflated.lo[0] = window.lo[0] - margin;
  inflated.hi[0] = window.hi[0] + margin;
  inflated.lo[1] = window.lo[1] - (rmax + cfg.half_width + 1.0);
  inflated.hi[1] = window.hi[1];
  safe_lo_ = inflated.lo[0] + rmax;
  safe_hi_ = inflated.hi[0] - rmax;

  edges_ = build_forest(cfg, inflated);
  level_lo_ = static_cast<std::int64_t>(std::floor(inflated.lo[1]));
  const std::int64_t level_hi = static_cast<std::int64_t>(std::floor(window.hi[1])) + 1;
  buckets_.assign(static_cast<std::size_t>(level_hi - level_lo_ + 1), {});
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const double h0 = edges_[i].from.position[1];
    const double h1 = edges_[i].to.position[1];
    const std::int64_t k0 = std::max(level_lo_, static_cast<std::int64_t>(std::floor(h0)));
    const std::int64_t k1 = std::min(level_hi, static_cast<std::int64_t>(std::floor(h1)));
    for (std::int64_t k = k0; k <= k1; ++k)
      buckets_[static_cast<std::size_t>(k - level_lo_)].push_back(static_cast<std::int32_t>(i));
  }
}

PathIndex::Crossing PathIndex::flank(double x, double t, Side side) const {
  const std::int64_t level = static_cast<std::int64_t>(std::floor(t));
  if (level < level_lo_ || level - level_lo_ >= static_cast<std::int64_t>(buckets_.size()))
    throw MarginExhausted("flank query height outside the indexed band");
  const auto& bucket = buckets_[static_cast<std::size_t>(level - level_lo_)];
  const ForestEdge* best = nullptr;
  double best_value = 0.0;
  auto slope = [](const ForestEdge& e) {
    return (e.to.position[0] - e.from.position[0]) / (e.to.position[1] - e.from.position[1]);
  };
  for (std::int32_t idx : bucket) {
    const ForestEdge& e = edges_[static_cast<std::size_t>(idx)];
    if (!(e.from.position[1] < t && e.to.position[1] >= t)) continue;
    const double v = edge_value_at(e, t);
    const bool qualifies = side == Side::kRight ? v > x : v < x;
    if (!qualifies) continue;
    bool better = false;
    if (!best) {
      better = true;
    } else if (v != best_value) {
      better = side == Side::kRight ? v < best_value : v > best_value;
    } else {
      // Edges sharing the crossing value (children of the same vertex when t
      // is exactly the vertex height): the gap is bounded just below t by the
      // edge nearest the query side, i.e. largest value at t - eps for a left
      // flank (smallest slope) and smallest for a right flank (largest slope).
      const double sa = slope(e), sb = slope(*best);
      if (sa != sb)
        better = side == Side::kRight ? sa > sb : sa < sb;
      else
        better = lex_less(e.from.position, best->from.position, 2);
    }
    if (better) {
      best = &e;
      best_value = v;
    }
  }
  const double safe = side == Side::kRight ? safe_hi_ : safe_lo_;
  if (!best || (side == Side::kRight ? best_value >= safe : best_value <= safe))
    throw MarginExhausted("flanking path not certifiable inside the margin");
  return Crossing{best->from, best->to, best_value};
}

DsfPath nearest_path(const FieldConfig& cfg, const Vec& xt, Side side, const Box& window,
                     double margin) {
  PathIndex index(cfg, window, margin);
  const PathIndex::Crossing c = index.flank(xt[0], xt[1], side);
  StopRule stop;
  stop.height_above = window.hi[1];
  return trace_path_from(cfg, c.from, stop);
}

namespace {

DualVertex make_dual_vertex(const PathIndex& index, const SitePoint& parent, Side side) {
  const double t = parent.position[1];
  const PathIndex::Crossing c = index.flank(parent.position[0], t, side);
  DualVertex v;
  v.position = make_vec((parent.position[0] + c.value) / 2.0, t);
  v.parent = parent;
  v.side = side;
  return v;
}

// Dual ancestor of (y, s): the higher of the two flanking vertices supplies
// the step; target is that vertex's dual neighbour on the opposite side.
DualVertex dual_ancestor(const PathIndex& index, const Vec& ys) {
  const PathIndex::Crossing right = index.flank(ys[0], ys[1], Side::kRight);
  const PathIndex::Crossing left = index.flank(ys[0], ys[1], Side::kLeft);
  if (right.from.position[1] > left.from.position[1])
    return make_dual_vertex(index, right.from, Side::kLeft);
  return make_dual_vertex(index, left.from, Side::kRight);
}

}  // namespace

DualForest build_dual(const FieldConfig& cfg, const Box& window, double margin) {
  if (cfg.dimension != 2) throw std::invalid_argument("dual forest is defined for d=2 only");
  DualForest forest;
  forest.window = window;
  forest.margin = margin;
  forest.index = std::make_shared<PathIndex>(cfg, window, margin);

  for (const SitePoint& p : points_in_box(cfg, window)) {
    for (Side side : {Side::kRight, Side::kLeft}) {
      forest.vertices.push_back(make_dual_vertex(*forest.index, p, side));
    }
  }
  forest.edges.reserve(forest.vertices.size());
  for (std::size_t i = 0; i < forest.vertices.size(); ++i) {
    const DualVertex target = dual_ancestor(*forest.index, forest.vertices[i].position);
    DualEdge e;
    e.from = static_cast<std::int32_t>(i);
    e.to_position = target.position;
    e.to_parent = target.parent.site;
    e.to_side = target.side;
    forest.edges.push_back(e);
  }
  return forest;
}

DualPath trace_dual_path(const FieldConfig& cfg, const PathIndex& index, const DualVertex& start,
                         double bottom) {
  (void)cfg;
  DualPath path;
  path.knots.push_back(start.position);
  Vec cur = start.position;
  while (cur[1] > bottom) {
    const DualVertex next = dual_ancestor(index, cur);
    path.knots.push_back(next.position);
    cur = next.position;
  }
  return path;
}

namespace {

double dual_value_at(const DualPath& p, double t) {
  // knots descend in height; linear interpolation
  for (std::size_t i = 0; i + 1 < p.knots.size(); ++i) {
    const Vec& hi = p.knots[i];
    const Vec& lo = p.knots[i + 1];
    if (t <= hi[1] && t >= lo[1]) {
      if (hi[1] == lo[1]) return hi[0];
      const double w = (t - lo[1]) / (hi[1] - lo[1]);
      return lo[0] + w * (hi[0] - lo[0]);
    }
  }
  return p.knots.back()[0];
}

}  // namespace

bool dual_primal_cross(const DsfPath& primal, const DualPath& dual) {
  if (dual.knots.empty()) return false;
  const double lo = std::max(primal.start_height(), dual.knots.back()[1]);
  const double hi = std::min(primal.end_height(), dual.knots.front()[1]);
  if (hi < lo) return false;
  bool pos = false, neg = false;
  auto probe = [&](double t) {
    if (t < lo || t > hi) return;
    const double diff = dual_value_at(dual, t) - path_value(primal, t)[0];
    if (diff > 0.0) pos = true;
    if (diff < 0.0) neg = true;
  };
  probe(lo);
  probe(hi);
  for (const SitePoint& v : primal.vertices) probe(v.position[1]);
  for (const Vec& k : dual.knots) probe(k[1]);
  return pos && neg;
}

BiInfiniteProbe probe_bi_infinite(const FieldConfig& cfg, const DualForest& forest) {
  (void)cfg;
  BiInfiniteProbe out;
  const double band_lo = forest.window.hi[1] - 1.0;
  const double bottom = forest.window.lo[1];
  std::unordered_map<DualKey, int, DualKeyHash> terminal;  // vertex -> component id
  int next_component = 0;
  std::vector<DualKey> trail;

  for (const DualVertex& v : forest.vertices) {
    if (v.position[1] < band_lo) continue;
    ++out.top_band_vertices;
    trail.clear();
    DualVertex cur = v;
    int component = -1;
    while (true) {
      const DualKey key{cur.parent.site, cur.side};
      if (auto it = terminal.find(key); it != terminal.end()) {
        component = it->second;
        break;
      }
      trail.push_back(key);
      if (cur.position[1] <= bottom) {
        component = next_component++;
        break;
      }
      cur = dual_ancestor(*forest.index, cur.position);
    }
    for (const DualKey& key : trail) terminal.emplace(key, component);
  }
  // components reached by the top band that exit below the bottom
  std::vector<int> seen;
  for (const DualVertex& v : forest.vertices) {
    if (v.position[1] < band_lo) continue;
    const auto it = terminal.find(DualKey{v.parent.site, v.side});
    if (it == terminal.end()) continue;
    if (std::find(seen.begin(), seen.end(), it->second) == seen.end()) seen.push_back(it->second);
  }
  out.traversing_components = static_cast<int>(seen.size());
  return out;
}

}  // namespace pdsf
