#include <cmath>
#include <random>

#include "doctest.h"
#include "pdsf/dsf.hpp"

using namespace pdsf;

namespace {

// Exhaustive-scan oracle for h(x): argmin over all sites in a generous box,
// same tie-break (lexicographically smallest position).
SitePoint brute_h_step(const FieldConfig& cfg, const Vec& x, std::int64_t radius) {
  const int d = cfg.dimension;
  SitePoint best{};
  double best_dist = 1e300;
  bool have = false;
  auto consider = [&](const LatticeSite& w) {
    SitePoint p = site_point(cfg, w);
    if (p.position[d - 1] <= x[d - 1]) return;
    const double dist = l1_dist(p.position, x, d);
    if (!have || dist < best_dist ||
        (dist == best_dist && lex_less(p.position, best.position, d))) {
      best = p;
      best_dist = dist;
      have = true;
    }
  };
  const std::int64_t cz = static_cast<std::int64_t>(std::floor(x[d - 1]));
  for (std::int64_t a = -radius; a <= radius; ++a)
    for (std::int64_t b = -radius; b <= radius; ++b) {
      if (d == 2) {
        consider(make_site(static_cast<std::int64_t>(std::floor(x[0])) + a, cz + b));
      } else {
        for (std::int64_t c = -radius; c <= radius; ++c)
          consider(make_site(static_cast<std::int64_t>(std::floor(x[0])) + a,
                             static_cast<std::int64_t>(std::floor(x[1])) + b, cz + c));
      }
    }
  REQUIRE(have);
  return best;
}

}  // namespace

TEST_CASE("h_step agrees with the exhaustive-scan oracle") {
  for (int d : {2, 3}) {
    FieldConfig cfg = FieldConfig::make(d, 42);
    std::mt19937_64 rng(17 + d);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    const int reps = d == 2 ? 2000 : 500;
    for (int rep = 0; rep < reps; ++rep) {
      Vec x{};
      for (int i = 0; i < d; ++i) x[i] = u(rng);
      SitePoint got = h_step(cfg, x);
      SitePoint want = brute_h_step(cfg, x, 8);
      CHECK(got.site == want.site);
      CHECK(got.position[d - 1] > x[d - 1]);
      CHECK(l1_dist(got.position, x, d) <= max_step_length(d, 1.0));
    }
  }
}

TEST_CASE("h_step at the origin equals the oracle over [-8,8]^2") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  Vec x = make_vec(0, 0);
  CHECK(h_step(cfg, x).site == brute_h_step(cfg, x, 8).site);
}

TEST_CASE("a unique nearby candidate wins when competitors are pushed away") {
  FieldConfig base = FieldConfig::make(2, 7);
  std::vector<std::pair<LatticeSite, Vec>> assign;
  for (std::int64_t a = -8; a <= 8; ++a)
    for (std::int64_t b = -7; b <= 8; ++b) {
      if (a == 0 && b == 1) continue;
      assign.push_back({make_site(a, b), make_vec(a >= 0 ? 1.0 : -1.0, b >= 0 ? 1.0 : -1.0)});
    }
  assign.push_back({make_site(0, 1), make_vec(0.3, 0.2)});  // position (0.3, 1.2)
  FieldConfig cfg = with_overrides(base, assign);
  SitePoint got = h_step(cfg, make_vec(0, 0));
  CHECK(got.site == make_site(0, 1));
  CHECK(got.position[0] == 0.3);
  CHECK(got.position[1] == 1.2);
}

TEST_CASE("trace_path basics") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  StopRule one;
  one.steps = 1;
  DsfPath p = trace_path(cfg, make_vec(0, 0), one);
  REQUIRE(p.vertices.size() == 1);
  CHECK(p.vertices[0].site == h_step(cfg, make_vec(0, 0)).site);

  StopRule many;
  many.steps = 10000;
  DsfPath q = trace_path(cfg, make_vec(0, 0), many);
  double prev = q.start_height();
  double max_inc = 0.0;
  Vec prev_pos = q.start;
  for (const SitePoint& v : q.vertices) {
    CHECK(v.position[1] > prev);
    max_inc = std::max(max_inc, l1_dist(v.position, prev_pos, 2));
    prev = v.position[1];
    prev_pos = v.position;
  }
  CHECK(max_inc <= 4.5);
}

TEST_CASE("paths that meet share their suffix") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  StopRule stop;
  stop.steps = 400;
  DsfPath a = trace_path(cfg, make_vec(0, 0), stop);
  DsfPath b = trace_path(cfg, make_vec(1, 0), stop);
  std::size_t ia = 0, ib = 0;
  while (ia < a.vertices.size() && ib < b.vertices.size() &&
         !(a.vertices[ia] == b.vertices[ib])) {
    if (a.vertices[ia].position[1] < b.vertices[ib].position[1])
      ++ia;
    else
      ++ib;
  }
  REQUIRE(ia < a.vertices.size());  // they do coalesce within the budget
  while (ia < a.vertices.size() && ib < b.vertices.size()) {
    CHECK(a.vertices[ia] == b.vertices[ib]);
    ++ia;
    ++ib;
  }
}

TEST_CASE("path_value interpolates linearly") {
  DsfPath p;
  p.dim = 2;
  p.start = make_vec(0, 0);
  SitePoint v;
  v.site = make_site(1, 2);
  v.position = make_vec(1, 2);
  p.vertices.push_back(v);
  CHECK(path_value(p, 1.0)[0] == 0.5);
  CHECK(path_value(p, 2.0)[0] == 1.0);
  CHECK(path_value(p, 0.0)[0] == 0.0);
  CHECK_THROWS_AS(path_value(p, -0.1), std::domain_error);
}

TEST_CASE("path_value is continuous along a monotone grid") {
  FieldConfig cfg = FieldConfig::make(2, 11);
  StopRule stop;
  stop.steps = 200;
  DsfPath p = trace_path(cfg, make_vec(0, 0), stop);
  double max_slope = 0.0;
  Vec prev = p.start;
  for (const SitePoint& v : p.vertices) {
    max_slope = std::max(max_slope, std::abs(v.position[0] - prev[0]) /
                                        (v.position[1] - prev[1]));
    prev = v.position;
  }
  const double t0 = p.start_height(), t1 = p.end_height();
  const double h = (t1 - t0) / 5000.0;
  double last = path_value(p, t0)[0];
  for (int i = 1; i <= 5000; ++i) {
    const double cur = path_value(p, t0 + i * h)[0];
    CHECK(std::abs(cur - last) <= max_slope * h + 1e-9);
    last = cur;
  }
}

TEST_CASE("build_forest emits one rising edge per window point") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  Box window;
  window.lo = make_vec(-20, -20);
  window.hi = make_vec(20, 20);
  auto edges = build_forest(cfg, window);
  auto pts = points_in_box(cfg, window);
  CHECK(edges.size() == pts.size());
  for (const auto& e : edges) {
    CHECK(e.to.site == h_step(cfg, e.from.position).site);
    CHECK(e.to.position[1] > e.from.position[1]);  // no cycles: heights order the graph
  }
}

TEST_CASE("traced paths are non-crossing") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  StopRule stop;
  stop.steps = 300;
  std::vector<DsfPath> paths;
  for (int x = -6; x <= 6; x += 3) paths.push_back(trace_path(cfg, make_vec(x, 0), stop));
  for (std::size_t i = 0; i < paths.size(); ++i)
    for (std::size_t j = i + 1; j < paths.size(); ++j)
      CHECK_FALSE(paths_cross(paths[i], paths[j]));
}

TEST_CASE("EdgeCache matches direct h_step") {
  FieldConfig cfg = FieldConfig::make(2, 9);
  EdgeCache cache(cfg);
  SitePoint p = site_point(cfg, make_site(0, 0));
  const SitePoint& n1 = cache.next(p);
  CHECK(n1.site == h_step(cfg, p.position).site);
  CHECK(cache.next(p).site == n1.site);
  CHECK(cache.size() == 1);
}
