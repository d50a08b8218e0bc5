#include "pdsf/explore.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace pdsf {

int default_m_d(int dimension) {
  return static_cast<int>(std::ceil(max_step_length(dimension, 1.0))) + 4;
}

double history_height(const HistoryRegion& h, int dim) {
  (void)dim;
  double top = h.baseline;
  for (const UpperBall& b : h.balls) top = std::max(top, b.apex[dim - 1] + b.radius);
  return top - h.baseline;
}

bool history_interior_contains(const HistoryRegion& h, const Vec& p, int dim) {
  if (p[dim - 1] <= h.baseline) return false;
  for (const UpperBall& b : h.balls) {
    if (b.radius <= 0.0) continue;
    if (p[dim - 1] > b.apex[dim - 1] && l1_dist(p, b.apex, dim) < b.radius) return true;
  }
  return false;
}

namespace {

void prune_history(HistoryRegion& h, int dim) {
  std::erase_if(h.balls,
                [&](const UpperBall& b) { return b.apex[dim - 1] + b.radius < h.baseline; });
}

}  // namespace

HistoryRegion update_history(HistoryRegion h, const std::vector<std::pair<Vec, Vec>>& moves,
                             double new_baseline, int dim) {
  for (const auto& [from, to] : moves) {
    if (!(to[dim - 1] > from[dim - 1]))
      throw std::invalid_argument("history move must strictly increase the d-th coordinate");
    h.balls.push_back({from, l1_dist(to, from, dim)});
  }
  h.baseline = new_baseline;
  prune_history(h, dim);
  return h;
}

bool cone_intersects_history(const HistoryRegion& h, const Vec& x, int dim) {
  // The open cone meets the clipped ball iff |apex_bar - x_bar|_1 < r - (x(d) - apex(d)).
  for (const UpperBall& b : h.balls) {
    if (b.radius <= 0.0) continue;
    if (transverse_l1_dist(b.apex, x, dim) < b.radius - (x[dim - 1] - b.apex[dim - 1]))
      return true;
  }
  return false;
}

std::vector<LatticeSite> infinity_neighbourhood(const LatticeSite& w, int dim) {
  std::vector<LatticeSite> out;
  if (dim == 2) {
    for (std::int64_t dy = 0; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx)
        out.push_back(make_site(w.c[0] + dx, w.c[1] + dy));
  } else {
    for (std::int64_t dz = 0; dz <= 1; ++dz)
      for (std::int64_t dx = -1; dx <= 1; ++dx)
        for (std::int64_t dy = -1; dy <= 1; ++dy)
          out.push_back(make_site(w.c[0] + dx, w.c[1] + dy, w.c[2] + dz));
  }
  return out;
}

bool event_A(const FieldConfig& cfg, const LatticeSite& w, double delta) {
  for (const LatticeSite& y : infinity_neighbourhood(w, cfg.dimension)) {
    const Vec off = perturbation(cfg, y);
    double l1 = 0.0;
    for (int i = 0; i < cfg.dimension; ++i) l1 += std::abs(off[i]);
    if (off[cfg.dimension - 1] < 0.0 || l1 > delta) return false;
  }
  return true;
}

namespace {

ExplorationState make_state(const FieldConfig& cfg, const LatticeSite& u,
                            const LatticeSite* v, const ExplorationParams& params) {
  ExplorationState s;
  s.dim = cfg.dimension;
  s.pair_mode = (v != nullptr);
  s.params = params;
  s.m_d = params.m_d > 0 ? params.m_d : default_m_d(cfg.dimension);
  auto pseudo = [&](const LatticeSite& w) {
    SitePoint p;
    p.site = w;
    for (int i = 0; i < cfg.dimension; ++i) p.position[i] = static_cast<double>(w.c[i]);
    return p;
  };
  s.position[0] = pseudo(u);
  if (v) s.position[1] = pseudo(*v);
  double base = s.position[0].position[cfg.dimension - 1];
  if (v) base = std::min(base, s.position[1].position[cfg.dimension - 1]);
  s.history.baseline = base;
  return s;
}

bool in_upper_cap(const Vec& p, const LatticeSite& w, double delta, int dim) {
  Vec c{};
  for (int i = 0; i < dim; ++i) c[i] = static_cast<double>(w.c[i]);
  return p[dim - 1] >= c[dim - 1] && l1_dist(p, c, dim) <= delta;
}

}  // namespace

ExplorationState make_single(const FieldConfig& cfg, const LatticeSite& start,
                             const ExplorationParams& params) {
  return make_state(cfg, start, nullptr, params);
}

ExplorationState make_pair(const FieldConfig& cfg, const LatticeSite& u, const LatticeSite& v,
                           const ExplorationParams& params) {
  return make_state(cfg, u, &v, params);
}

StepKind classify_step(int dim, bool equal_floors_before, const LatticeSite up_sites_before[2],
                       int n_walkers, const SitePoint after[2], double delta,
                       const bool a_flags[2]) {
  if (n_walkers == 2 && !equal_floors_before) return StepKind::kBasic;
  for (int i = 0; i < n_walkers; ++i)
    if (!in_upper_cap(after[i].position, up_sites_before[i], delta, dim)) return StepKind::kBasic;
  bool a_all = true;
  for (int i = 0; i < n_walkers; ++i) a_all = a_all && a_flags[i];
  return a_all ? StepKind::kSpecialUp : StepKind::kUp;
}

void joint_step(ExplorationState& state, const FieldConfig& cfg) {
  const int d = state.dim;
  const int nw = state.pair_mode ? 2 : 1;
  const double delta = state.params.delta;

  // Pre-step data feeding the classification.
  LatticeSite ups[2];
  std::int64_t floors[2] = {0, 0};
  for (int i = 0; i < nw; ++i) {
    ups[i] = up_site(state.position[i].position, d);
    floors[i] = static_cast<std::int64_t>(std::floor(state.position[i].position[d - 1]));
  }
  const bool equal_floors = (nw == 2) ? (floors[0] == floors[1]) : true;

  bool moved[2] = {false, false};
  std::vector<std::pair<Vec, Vec>> moves;
  const bool was_coalesced = state.coalesced;

  if (nw == 1) {
    SitePoint to = h_step(cfg, state.position[0].position);
    moves.push_back({state.position[0].position, to.position});
    state.position[0] = to;
    moved[0] = true;
  } else if (was_coalesced) {
    // Both walkers ride the merged path; absorption adds no new history.
    SitePoint to = h_step(cfg, state.position[0].position);
    state.position[0] = to;
    state.position[1] = to;
    moved[0] = moved[1] = true;
  } else if (!equal_floors) {
    const int lower = floors[0] < floors[1] ? 0 : 1;
    SitePoint to = h_step(cfg, state.position[lower].position);
    moves.push_back({state.position[lower].position, to.position});
    state.position[lower] = to;
    moved[lower] = true;
  } else {
    SitePoint tu = h_step(cfg, state.position[0].position);
    SitePoint tv = h_step(cfg, state.position[1].position);
    if (state.started[1] && tu == state.position[1]) {
      // u steps onto v; it takes h^2 while v takes h. The second leg follows
      // v's trajectory and generates no new explored region.
      moves.push_back({state.position[0].position, tu.position});
      moves.push_back({state.position[1].position, tv.position});
      state.position[0] = tv;
      state.position[1] = tv;
    } else if (state.started[0] && tv == state.position[0]) {
      moves.push_back({state.position[1].position, tv.position});
      moves.push_back({state.position[0].position, tu.position});
      state.position[0] = tu;
      state.position[1] = tu;
    } else {
      moves.push_back({state.position[0].position, tu.position});
      moves.push_back({state.position[1].position, tv.position});
      state.position[0] = tu;
      state.position[1] = tv;
    }
    moved[0] = moved[1] = true;
  }

  for (int i = 0; i < nw; ++i)
    if (moved[i]) state.started[i] = true;

  double base = state.position[0].position[d - 1];
  if (nw == 2) base = std::min(base, state.position[1].position[d - 1]);
  state.history = update_history(std::move(state.history), moves, base, d);

  if (state.params.track_used_sites)
    for (int i = 0; i < nw; ++i)
      if (moved[i]) state.used_sites.insert(state.position[i].site);

  if (nw == 2 && !state.coalesced && state.position[0] == state.position[1]) {
    state.coalesced = true;
    state.coalesced_step = state.step_index + 1;
  }

  ++state.step_index;

  // Mechanical part of the up-step test; the A-events only separate special
  // from plain up, so they are evaluated lazily.
  bool mech_up = equal_floors;
  for (int i = 0; i < nw && mech_up; ++i)
    mech_up = in_upper_cap(state.position[i].position, ups[i], delta, d);

  bool a_flags[2] = {false, false};
  bool a_known = false;
  const bool renewal_window =
      mech_up && state.up_run + 1 >= state.m_d &&
      state.step_index > state.last_renewal_step + state.m_d;
  if (state.params.record_log || renewal_window) {
    for (int i = 0; i < nw; ++i) a_flags[i] = event_A(cfg, ups[i], delta);
    a_known = true;
  }

  StepKind kind = StepKind::kBasic;
  if (mech_up) {
    bool a_all = a_known;
    for (int i = 0; i < nw && a_all; ++i) a_all = a_flags[i];
    kind = a_all ? StepKind::kSpecialUp : StepKind::kUp;
  }
  state.up_run = (kind == StepKind::kBasic) ? 0 : state.up_run + 1;

  if (state.params.record_log) {
    StepEvent ev;
    ev.index = state.step_index;
    ev.moved[0] = moved[0];
    ev.moved[1] = moved[1];
    ev.kind = kind;
    ev.after[0] = state.position[0];
    if (nw == 2) ev.after[1] = state.position[1];
    ev.a_flag[0] = a_flags[0];
    ev.a_flag[1] = a_flags[1];
    ev.up_before[0] = ups[0];
    if (nw == 2) ev.up_before[1] = ups[1];
    ev.equal_floors_before = equal_floors;
    state.log.push_back(ev);
  }

  if (kind == StepKind::kSpecialUp && state.up_run >= state.m_d &&
      state.step_index > state.last_renewal_step + state.m_d) {
    // Exactness guard: the landing must be the up-site's own point, so the
    // hat-site bookkeeping matches the restart semantics (automatic for
    // delta < 1/2, enforced explicitly for larger caps).
    bool hats_ok = true;
    for (int i = 0; i < nw; ++i) hats_ok = hats_ok && state.position[i].site == ups[i];
    if (hats_ok) {
      RenewalRecord rec;
      rec.j = static_cast<int>(state.renewals.size()) + 1;
      rec.tau = state.step_index;
      rec.hat[0] = state.position[0].site;
      if (nw == 2) rec.hat[1] = state.position[1].site;
      rec.gap = state.step_index - state.last_renewal_step;
      rec.width = 2.0 * state.m_d * static_cast<double>(rec.gap);
      state.renewals.push_back(rec);
      state.last_renewal_step = state.step_index;
    }
  }
}

std::vector<RenewalRecord> detect_renewals(const std::vector<StepEvent>& log, int m_d,
                                           bool pair_mode) {
  if (m_d < 5) throw std::invalid_argument("m_d must be >= 5");
  std::vector<RenewalRecord> out;
  std::int64_t up_run = 0;
  std::int64_t last = 0;
  const int nw = pair_mode ? 2 : 1;
  for (const StepEvent& ev : log) {
    up_run = (ev.kind == StepKind::kBasic) ? 0 : up_run + 1;
    if (ev.kind != StepKind::kSpecialUp || up_run < m_d || ev.index <= last + m_d) continue;
    bool hats_ok = true;
    for (int i = 0; i < nw; ++i) hats_ok = hats_ok && ev.after[i].site == ev.up_before[i];
    if (!hats_ok) continue;
    RenewalRecord rec;
    rec.j = static_cast<int>(out.size()) + 1;
    rec.tau = ev.index;
    for (int i = 0; i < nw; ++i) rec.hat[i] = ev.after[i].site;
    rec.gap = ev.index - last;
    rec.width = 2.0 * m_d * static_cast<double>(rec.gap);
    out.push_back(rec);
    last = ev.index;
  }
  return out;
}

Observables extract_observables(const std::vector<RenewalRecord>& records, bool pair_mode,
                                int dim) {
  Observables obs;
  for (const RenewalRecord& r : records) {
    obs.gaps.push_back(r.gap);
    obs.widths.push_back(r.width);
  }
  if (!pair_mode) {
    for (std::size_t j = 1; j < records.size(); ++j) {
      std::array<std::int64_t, 2> y{};
      for (int i = 0; i + 1 < dim; ++i)
        y[i] = records[j].hat[0].c[i] - records[j - 1].hat[0].c[i];
      obs.Y.push_back(y);
    }
  } else {
    for (std::size_t j = 0; j < records.size(); ++j) {
      std::array<std::int64_t, 2> z{};
      bool zero = true;
      for (int i = 0; i + 1 < dim; ++i) {
        z[i] = records[j].hat[0].c[i] - records[j].hat[1].c[i];
        zero = zero && z[i] == 0;
      }
      obs.Z.push_back(z);
      if (!obs.nu && zero && records[j].j >= 2) obs.nu = records[j].j;
    }
  }
  return obs;
}

InvariantReport verify_exploration_invariants(const ExplorationState& state,
                                              const FieldConfig& cfg) {
  InvariantReport report;
  const int d = state.dim;
  auto fail = [&](std::string kind, std::string detail) {
    report.pass = false;
    report.violations.push_back({std::move(kind), std::move(detail)});
  };

  // (a) no field point strictly inside the clipped history region
  for (const UpperBall& b : state.history.balls) {
    if (b.radius <= 0.0) continue;
    Box bbox;
    for (int i = 0; i + 1 < d; ++i) {
      bbox.lo[i] = b.apex[i] - b.radius;
      bbox.hi[i] = b.apex[i] + b.radius;
    }
    bbox.lo[d - 1] = std::max(b.apex[d - 1], state.history.baseline);
    bbox.hi[d - 1] = b.apex[d - 1] + b.radius;
    for (const SitePoint& p : points_in_box(cfg, bbox)) {
      if (history_interior_contains(state.history, p.position, d)) {
        std::ostringstream os;
        os << "field point (" << p.position[0] << ", " << p.position[1];
        if (d == 3) os << ", " << p.position[2];
        os << ") inside history interior";
        fail("history-point", os.str());
      }
    }
  }

  // (b) unexplored cones at the current positions
  const int nw = state.pair_mode ? 2 : 1;
  for (int i = 0; i < nw; ++i) {
    if (!state.started[i]) continue;
    if (cone_intersects_history(state.history, state.position[i].position, d))
      fail("cone", "walker cone meets the history region");
  }

  // (c) height bound
  const double height = history_height(state.history, d);
  if (height > state.m_d - 4 + 1e-12) {
    std::ostringstream os;
    os << "L(H) = " << height << " > m_d - 4 = " << (state.m_d - 4);
    fail("height", os.str());
  }
  return report;
}

SimultaneousRenewals independent_pair_renewals(const FieldConfig& field_a,
                                               const FieldConfig& field_b, const LatticeSite& u,
                                               const LatticeSite& v, std::int64_t step_budget,
                                               const ExplorationParams& params) {
  ExplorationState sa = make_single(field_a, u, params);
  ExplorationState sb = make_single(field_b, v, params);
  for (std::int64_t n = 0; n < step_budget; ++n) joint_step(sa, field_a);
  for (std::int64_t n = 0; n < step_budget; ++n) joint_step(sb, field_b);

  SimultaneousRenewals out;
  out.marginal_count_u = static_cast<std::int64_t>(sa.renewals.size());
  out.marginal_count_v = static_cast<std::int64_t>(sb.renewals.size());
  std::size_t ia = 0, ib = 0;
  while (ia < sa.renewals.size() && ib < sb.renewals.size()) {
    const std::int64_t ta = sa.renewals[ia].tau;
    const std::int64_t tb = sb.renewals[ib].tau;
    if (ta == tb) {
      out.common.push_back({ta, sa.renewals[ia].hat[0], sb.renewals[ib].hat[0]});
      ++ia;
      ++ib;
    } else if (ta < tb) {
      ++ia;
    } else {
      ++ib;
    }
  }
  out.truncated = true;  // a finite budget always ends before the next match
  return out;
}

}  // namespace pdsf
