#include "pdsf/dsf.hpp"

#include <cmath>
#include <stdexcept>

namespace pdsf {

double max_step_length(int dimension, double half_width) {
  return (dimension - 1) * (0.5 + half_width) + 2.0 + half_width;
}

namespace {

std::int64_t nearest_int(double x) {
  // Ties (fractional part exactly 1/2) resolve toward the smaller integer.
  const double f = std::floor(x);
  const double frac = x - f;
  if (frac > 0.5) return static_cast<std::int64_t>(f) + 1;
  return static_cast<std::int64_t>(f);
}

}  // namespace

LatticeSite up_site(const Vec& x, int dim) {
  LatticeSite w{};
  for (int i = 0; i + 1 < dim; ++i) w.c[i] = nearest_int(x[i]);
  w.c[dim - 1] = static_cast<std::int64_t>(std::floor(x[dim - 1])) + 1;
  return w;
}

LatticeSite down_site(const Vec& x, int dim) {
  LatticeSite w = up_site(x, dim);
  w.c[dim - 1] -= 1;
  return w;
}

SitePoint h_step(const FieldConfig& cfg, const Vec& x) {
  const int d = cfg.dimension;
  const double rho = cfg.half_width;
  const double xd = x[d - 1];

  // A qualifying candidate always exists within this radius (see max_step_length),
  // so it is a valid incumbent bound for the shell scan.
  double best_dist = max_step_length(d, rho) + 1e-9;
  std::optional<SitePoint> best;

  auto consider = [&](const LatticeSite& w) {
    SitePoint p = site_point(cfg, w);
    if (p.position[d - 1] <= xd) return;
    const double dist = l1_dist(p.position, x, d);
    if (dist < best_dist ||
        (dist == best_dist && best && lex_less(p.position, best->position, d))) {
      best_dist = dist;
      best = p;
    }
  };

  // Seed the incumbent with the likely winners so the shell scan stays tight.
  {
    LatticeSite up = up_site(x, d);
    consider(up);
    LatticeSite up2 = up;
    up2.c[d - 1] += 1;
    consider(up2);
    consider(down_site(x, d));
  }

  // Lowest lattice level whose box can reach strictly above x(d).
  std::int64_t level0;
  {
    const double t = xd - rho;
    const double f = std::floor(t);
    level0 = static_cast<std::int64_t>(f) + 1;
    if (f == t) level0 = static_cast<std::int64_t>(t) + 1;
  }

  while (true) {
    for (std::int64_t level = level0;; ++level) {
      const double vlb = std::max(0.0, static_cast<double>(level) - rho - xd);
      if (vlb > best_dist) break;

      LatticeSite w{};
      w.c[d - 1] = level;
      if (d == 2) {
        const double tbudget = best_dist - vlb;
        const std::int64_t lo = static_cast<std::int64_t>(std::ceil(x[0] - rho - tbudget));
        const std::int64_t hi = static_cast<std::int64_t>(std::floor(x[0] + rho + tbudget));
        for (std::int64_t a = lo; a <= hi; ++a) {
          w.c[0] = a;
          consider(w);
        }
      } else {
        double tbudget = best_dist - vlb;
        std::int64_t lo0 = static_cast<std::int64_t>(std::ceil(x[0] - rho - tbudget));
        std::int64_t hi0 = static_cast<std::int64_t>(std::floor(x[0] + rho + tbudget));
        for (std::int64_t a = lo0; a <= hi0; ++a) {
          w.c[0] = a;
          const double lb0 = std::max(0.0, std::abs(static_cast<double>(a) - x[0]) - rho);
          tbudget = best_dist - vlb;  // the incumbent may have shrunk
          if (lb0 + vlb > best_dist) continue;
          const double rem = tbudget - lb0;
          const std::int64_t lo1 = static_cast<std::int64_t>(std::ceil(x[1] - rho - rem));
          const std::int64_t hi1 = static_cast<std::int64_t>(std::floor(x[1] + rho + rem));
          for (std::int64_t b = lo1; b <= hi1; ++b) {
            w.c[1] = b;
            consider(w);
          }
        }
      }
    }
    if (best) return *best;
    best_dist *= 2.0;  // unreachable for rho-bounded offsets; guards degenerate configs
  }
}

const SitePoint& EdgeCache::next(const SitePoint& from) {
  auto it = map_.find(from.site);
  if (it != map_.end()) return it->second;
  SitePoint to = h_step(*cfg_, from.position);
  return map_.emplace(from.site, to).first->second;
}

namespace {

bool stop_reached(const StopRule& stop, const DsfPath& path, std::int64_t steps, int dim) {
  if (stop.steps && steps >= *stop.steps) return true;
  if (stop.height_above && !path.vertices.empty() &&
      path.vertices.back().position[dim - 1] > *stop.height_above)
    return true;
  return false;
}

}  // namespace

DsfPath trace_path(const FieldConfig& cfg, const Vec& start, const StopRule& stop) {
  if (!stop.steps && !stop.height_above) throw std::invalid_argument("stop rule required");
  DsfPath path;
  path.dim = cfg.dimension;
  path.start = start;
  Vec cur = start;
  std::int64_t steps = 0;
  while (!stop_reached(stop, path, steps, cfg.dimension)) {
    SitePoint nxt = h_step(cfg, cur);
    path.vertices.push_back(nxt);
    cur = nxt.position;
    ++steps;
  }
  return path;
}

DsfPath trace_path_from(const FieldConfig& cfg, const SitePoint& origin, const StopRule& stop,
                        EdgeCache* cache) {
  DsfPath path;
  path.dim = cfg.dimension;
  path.start = origin.position;
  SitePoint cur = origin;
  std::int64_t steps = 0;
  while (!stop_reached(stop, path, steps, cfg.dimension)) {
    SitePoint nxt = cache ? cache->next(cur) : h_step(cfg, cur.position);
    path.vertices.push_back(nxt);
    cur = nxt;
    ++steps;
  }
  return path;
}

Vec path_value(const DsfPath& path, double t) {
  const int d = path.dim;
  if (t < path.start_height()) throw std::domain_error("query below the path's starting time");
  Vec lo = path.start;
  for (const SitePoint& v : path.vertices) {
    const Vec& hi = v.position;
    if (t <= hi[d - 1]) {
      Vec out{};
      if (t == hi[d - 1]) {
        for (int i = 0; i + 1 < d; ++i) out[i] = hi[i];
        return out;
      }
      const double span = hi[d - 1] - lo[d - 1];
      const double w = (t - lo[d - 1]) / span;
      for (int i = 0; i + 1 < d; ++i) out[i] = lo[i] + w * (hi[i] - lo[i]);
      return out;
    }
    lo = hi;
  }
  Vec out{};
  for (int i = 0; i + 1 < d; ++i) out[i] = lo[i];
  return out;
}

std::vector<ForestEdge> build_forest(const FieldConfig& cfg, const Box& window) {
  std::vector<ForestEdge> edges;
  for (const SitePoint& p : points_in_box(cfg, window))
    edges.push_back({p, h_step(cfg, p.position)});
  return edges;
}

bool paths_cross(const DsfPath& a, const DsfPath& b) {
  const double lo = std::max(a.start_height(), b.start_height());
  const double hi = std::min(a.end_height(), b.end_height());
  if (hi < lo) return false;
  bool pos = false, neg = false;
  auto probe = [&](double t) {
    const double diff = path_value(a, t)[0] - path_value(b, t)[0];
    if (diff > 0.0) pos = true;
    if (diff < 0.0) neg = true;
  };
  probe(lo);
  for (const SitePoint& v : a.vertices) {
    const double t = v.position[a.dim - 1];
    if (t >= lo && t <= hi) probe(t);
  }
  for (const SitePoint& v : b.vertices) {
    const double t = v.position[b.dim - 1];
    if (t >= lo && t <= hi) probe(t);
  }
  probe(hi);
  return pos && neg;
}

}  // namespace pdsf
