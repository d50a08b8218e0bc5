#include "pdsf/tracer.hpp"

#include <cmath>
#include <unordered_map>

namespace pdsf {

PairCoalescence trace_pair_coalescence(const FieldConfig& cfg, const LatticeSite& u,
                                       const LatticeSite& v, double height_cap,
                                       std::int64_t step_cap) {
  const int d = cfg.dimension;
  PairCoalescence out;
  Vec pos[2];
  for (int i = 0; i < d; ++i) {
    pos[0][i] = static_cast<double>(u.c[i]);
    pos[1][i] = static_cast<double>(v.c[i]);
  }
  std::optional<LatticeSite> at[2];  // current vertex identity once on the field

  while (out.steps < step_cap) {
    const double h0 = pos[0][d - 1];
    const double h1 = pos[1][d - 1];
    if (std::min(h0, h1) > height_cap) break;
    const int mover = h0 <= h1 ? 0 : 1;
    SitePoint nxt = h_step(cfg, pos[mover]);
    ++out.steps;
    pos[mover] = nxt.position;
    at[mover] = nxt.site;
    if (at[0] && at[1] && *at[0] == *at[1]) {
      out.coalesced = true;
      out.height = nxt.position[d - 1];
      break;
    }
  }
  out.reached_height = std::min(pos[0][d - 1], pos[1][d - 1]);
  return out;
}

MultiCoalescence trace_multi_coalescence(const FieldConfig& cfg,
                                         const std::vector<LatticeSite>& starts,
                                         double height_cap, std::int64_t step_cap) {
  const int d = cfg.dimension;
  MultiCoalescence out;
  struct Walker {
    Vec pos{};
    int group = 0;
    bool alive = true;
  };
  std::vector<Walker> walkers(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    for (int i = 0; i < d; ++i) walkers[k].pos[i] = static_cast<double>(starts[k].c[i]);
    walkers[k].group = static_cast<int>(k);
  }
  int alive = static_cast<int>(starts.size());
  // every vertex ever visited, mapped to the group that owns it
  std::unordered_map<LatticeSite, int, LatticeSiteHash> visited;

  while (alive > 1 && out.steps < step_cap) {
    int mover = -1;
    double lowest = 0.0;
    for (std::size_t k = 0; k < walkers.size(); ++k) {
      if (!walkers[k].alive) continue;
      if (mover < 0 || walkers[k].pos[d - 1] < lowest) {
        mover = static_cast<int>(k);
        lowest = walkers[k].pos[d - 1];
      }
    }
    if (lowest > height_cap) break;
    Walker& w = walkers[mover];
    SitePoint nxt = h_step(cfg, w.pos);
    ++out.steps;
    w.pos = nxt.position;
    auto [it, fresh] = visited.try_emplace(nxt.site, w.group);
    if (!fresh && it->second != w.group) {
      // merge: drop this walker, absorb its group into the owner's
      const int from = w.group, into = it->second;
      w.alive = false;
      --alive;
      for (auto& other : walkers)
        if (other.group == from) other.group = into;
      for (auto& [site, g] : visited)
        if (g == from) g = into;
      out.last_merge_height = nxt.position[d - 1];
    }
  }
  out.groups_left = alive;
  out.all_coalesced = (alive == 1);
  return out;
}

std::vector<double> transverse_at_heights(const FieldConfig& cfg, const Vec& start,
                                          const std::vector<double>& heights) {
  const int d = cfg.dimension;
  std::vector<double> out;
  out.reserve(heights.size());
  Vec lo = start;
  Vec hi = start;
  std::size_t i = 0;
  while (i < heights.size()) {
    if (heights[i] <= hi[d - 1]) {
      if (hi[d - 1] == lo[d - 1]) {
        out.push_back(hi[0]);
      } else {
        const double w = (heights[i] - lo[d - 1]) / (hi[d - 1] - lo[d - 1]);
        out.push_back(lo[0] + w * (hi[0] - lo[0]));
      }
      ++i;
      continue;
    }
    lo = hi;
    hi = h_step(cfg, lo).position;
  }
  return out;
}

}  // namespace pdsf
