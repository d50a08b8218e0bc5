#include <cmath>

#include "doctest.h"
#include "pdsf/explore.hpp"

using namespace pdsf;

TEST_CASE("update_history adds the mover ball and prunes below the baseline") {
  HistoryRegion h;
  h = update_history(h, {{make_vec(0, 0), make_vec(0.4, 1.1)}}, 1.1, 2);
  REQUIRE(h.balls.size() == 1);
  CHECK(h.balls[0].apex == make_vec(0, 0));
  CHECK(h.balls[0].radius == doctest::Approx(1.5));
  CHECK(h.baseline == 1.1);

  // raising the baseline past apex+radius drops the ball
  h = update_history(h, {{make_vec(0.4, 1.1), make_vec(0.4, 2.0)}}, 2.0, 2);
  bool first_gone = true;
  for (const auto& b : h.balls) first_gone = first_gone && !(b.apex == make_vec(0, 0));
  CHECK(first_gone);

  CHECK_THROWS_AS(update_history(h, {{make_vec(0, 5), make_vec(0, 4)}}, 4, 2),
                  std::invalid_argument);
}

TEST_CASE("history_height of simple regions") {
  HistoryRegion h;
  CHECK(history_height(h, 2) == 0.0);
  h.baseline = 0.0;
  h.balls.push_back({make_vec(0, 0), 1.5});
  CHECK(history_height(h, 2) == doctest::Approx(1.5));
  h.balls.push_back({make_vec(3, -0.5), 1.0});
  CHECK(history_height(h, 2) == doctest::Approx(1.5));
}

TEST_CASE("history interior membership and cone test") {
  HistoryRegion h;
  h.baseline = 0.5;
  h.balls.push_back({make_vec(0, 0), 2.0});

  CHECK(history_interior_contains(h, make_vec(0.2, 1.0), 2));
  CHECK_FALSE(history_interior_contains(h, make_vec(0.2, 0.4), 2));   // below baseline
  CHECK_FALSE(history_interior_contains(h, make_vec(1.0, 1.0), 2));   // on the sphere
  CHECK_FALSE(history_interior_contains(h, make_vec(2.5, 1.0), 2));   // outside

  // apex of the cone on the ball surface: tangent, no intersection
  CHECK_FALSE(cone_intersects_history(h, make_vec(1.0, 1.0), 2));
  // cone from a point next to the ball's axis pokes into it
  CHECK(cone_intersects_history(h, make_vec(0.1, 0.8), 2));
  // far above: no intersection
  CHECK_FALSE(cone_intersects_history(h, make_vec(0, 2.5), 2));
}

TEST_CASE("event A is realized exactly by overrides") {
  const double delta = 0.3;
  FieldConfig base = FieldConfig::make(2, 5);
  const LatticeSite w = make_site(0, 1);
  std::vector<std::pair<LatticeSite, Vec>> caps;
  for (const LatticeSite& y : infinity_neighbourhood(w, 2))
    caps.push_back({y, make_vec(0.05, 0.1)});  // |.|_1 = 0.15 <= delta, upward
  FieldConfig cfg = with_overrides(base, caps);
  CHECK(event_A(cfg, w, delta));

  caps.back().second = make_vec(0.0, 0.9);  // one site outside its cap
  FieldConfig bad = with_overrides(base, caps);
  CHECK_FALSE(event_A(bad, w, delta));

  caps.back().second = make_vec(0.05, -0.1);  // downward offset also breaks A
  FieldConfig bad2 = with_overrides(base, caps);
  CHECK_FALSE(event_A(bad2, w, delta));
}

namespace {

SitePoint fake_point(std::int64_t sx, std::int64_t sy, double px, double py) {
  SitePoint p;
  p.site = make_site(sx, sy);
  p.position = make_vec(px, py);
  p.offset = make_vec(px - sx, py - sy);
  return p;
}

// Pushes every site in the box away from the action, except the listed pins.
FieldConfig synthetic_field(const std::vector<std::pair<LatticeSite, Vec>>& pins,
                            std::int64_t x0, std::int64_t x1, std::int64_t y0, std::int64_t y1) {
  FieldConfig base = FieldConfig::make(2, 123);
  std::vector<std::pair<LatticeSite, Vec>> assign;
  for (std::int64_t a = x0; a <= x1; ++a)
    for (std::int64_t b = y0; b <= y1; ++b) {
      bool pinned = false;
      for (const auto& [s, off] : pins) pinned = pinned || (s == make_site(a, b));
      if (!pinned)
        assign.push_back(
            {make_site(a, b), make_vec(a >= 0 ? 1.0 : -1.0, b >= 1 ? 1.0 : -1.0)});
    }
  for (const auto& pin : pins) assign.push_back(pin);
  return with_overrides(base, assign);
}

}  // namespace

TEST_CASE("joint_step moves only the lower walker when floors differ") {
  FieldConfig cfg = FieldConfig::make(2, 77);
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(6, 0));
  s.position[0] = fake_point(0, 0, 0.2, 0.3);
  s.position[1] = fake_point(6, 2, 6.1, 2.4);
  s.started[0] = s.started[1] = true;
  s.history.baseline = 0.3;

  const SitePoint v_before = s.position[1];
  joint_step(s, cfg);
  CHECK(s.position[1] == v_before);
  CHECK(s.position[0].position[1] > 0.3);
  CHECK(s.log.empty());  // logging off by default
}

TEST_CASE("coalesced pairs are absorbed: identical positions and no new history") {
  FieldConfig cfg = FieldConfig::make(2, 77);
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(0, 0));
  SitePoint at = site_point(cfg, make_site(2, 3));
  s.position[0] = at;
  s.position[1] = at;
  s.started[0] = s.started[1] = true;
  s.coalesced = true;
  s.history.baseline = at.position[1];
  const std::size_t balls_before = s.history.balls.size();

  joint_step(s, cfg);
  CHECK(s.position[0] == s.position[1]);
  CHECK(s.history.balls.size() <= balls_before);  // nothing added, pruning allowed
  CHECK(s.coalesced);
}

TEST_CASE("equal floors with h(g(u)) = g(v) triggers the h^2 rule and coalescence") {
  // u at (0, 0.2); v is the field point (1, 0.5); nearest above u is v itself;
  // nearest above v is the point at (1.2, 1.4).
  std::vector<std::pair<LatticeSite, Vec>> pins = {
      {make_site(1, 0), make_vec(0.0, 0.5)},   // g(v) = (1, 0.5)
      {make_site(1, 1), make_vec(0.2, 0.4)},   // h(g(v)) = (1.2, 1.4)
  };
  FieldConfig cfg = synthetic_field(pins, -6, 8, -1, 7);
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(1, 0));
  s.position[0] = fake_point(0, 0, 0.0, 0.2);
  s.position[1] = site_point(cfg, make_site(1, 0));
  s.started[0] = s.started[1] = true;
  s.history.baseline = 0.2;
  s.params.record_log = true;

  REQUIRE(h_step(cfg, s.position[0].position).site == make_site(1, 0));
  joint_step(s, cfg);

  CHECK(s.coalesced);
  CHECK(s.position[0] == s.position[1]);
  CHECK(s.position[0].site == make_site(1, 1));
  REQUIRE(s.log.size() == 1);
  CHECK(s.log[0].moved[0]);
  CHECK(s.log[0].moved[1]);
}

TEST_CASE("classification of synthetic up / special-up / basic steps") {
  const double delta = 0.3;
  // Walkers at heights 0.5 above sites (0,0) and (10,0); all N sites of both
  // up-sites pinned inside their caps, so the landings are the up-site points.
  std::vector<std::pair<LatticeSite, Vec>> pins;
  for (const LatticeSite& y : infinity_neighbourhood(make_site(0, 1), 2))
    pins.push_back({y, make_vec(0.05, 0.1)});
  for (const LatticeSite& y : infinity_neighbourhood(make_site(10, 1), 2))
    pins.push_back({y, make_vec(-0.05, 0.1)});
  FieldConfig cfg = synthetic_field(pins, -5, 15, -1, 8);

  ExplorationParams params;
  params.delta = delta;
  params.record_log = true;
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(10, 0), params);
  s.position[0] = fake_point(0, 0, 0.0, 0.5);
  s.position[1] = fake_point(10, 0, 10.0, 0.5);
  s.started[0] = s.started[1] = true;
  s.history.baseline = 0.5;

  joint_step(s, cfg);
  REQUIRE(s.log.size() == 1);
  CHECK(s.log[0].kind == StepKind::kSpecialUp);
  CHECK(s.position[0].site == make_site(0, 1));
  CHECK(s.position[1].site == make_site(10, 1));

  // Same geometry but one N(g-up) site outside its cap: up, not special.
  auto pins_up = pins;
  pins_up[2].second = make_vec(0.0, 0.9);  // a neighbour of (0,1), pushed out of its cap
  REQUIRE(pins_up[2].first == make_site(1, 1));
  FieldConfig cfg_up = synthetic_field(pins_up, -5, 15, -1, 8);
  ExplorationState s2 = make_pair(cfg_up, make_site(0, 0), make_site(10, 0), params);
  s2.position[0] = fake_point(0, 0, 0.0, 0.5);
  s2.position[1] = fake_point(10, 0, 10.0, 0.5);
  s2.started[0] = s2.started[1] = true;
  s2.history.baseline = 0.5;
  joint_step(s2, cfg_up);
  REQUIRE(s2.log.size() == 1);
  CHECK(s2.log[0].kind == StepKind::kUp);

  // Landing outside the cap: basic.
  auto pins_basic = pins;
  pins_basic.push_back({make_site(0, 0), make_vec(0.2, 0.85)});  // point (0.2, 0.85), closer
  FieldConfig cfg_basic = synthetic_field(pins_basic, -5, 15, -1, 8);
  ExplorationState s3 = make_pair(cfg_basic, make_site(0, 0), make_site(10, 0), params);
  s3.position[0] = fake_point(0, 0, 0.0, 0.5);
  s3.position[1] = fake_point(10, 0, 10.0, 0.5);
  s3.started[0] = s3.started[1] = true;
  s3.history.baseline = 0.5;
  joint_step(s3, cfg_basic);
  REQUIRE(s3.log.size() == 1);
  CHECK(s3.log[0].kind == StepKind::kBasic);
  CHECK(s3.position[0].site == make_site(0, 0));
}

namespace {

StepEvent up_event(std::int64_t index, StepKind kind, std::int64_t hat_x, std::int64_t hat_y) {
  StepEvent ev;
  ev.index = index;
  ev.kind = kind;
  ev.moved[0] = true;
  ev.after[0].site = make_site(hat_x, hat_y);
  ev.after[0].position = make_vec(static_cast<double>(hat_x), hat_y + 0.05);
  ev.up_before[0] = ev.after[0].site;
  ev.a_flag[0] = kind == StepKind::kSpecialUp;
  ev.equal_floors_before = true;
  return ev;
}

}  // namespace

TEST_CASE("detect_renewals applies the window rule by hand") {
  const int m_d = 9;
  std::vector<StepEvent> log;
  for (std::int64_t n = 1; n <= 9; ++n) log.push_back(up_event(n, StepKind::kBasic, 0, n));
  for (std::int64_t n = 10; n <= 18; ++n)
    log.push_back(up_event(n, n == 18 ? StepKind::kSpecialUp : StepKind::kUp, 0, n));
  auto recs = detect_renewals(log, m_d, false);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].tau == 18);
  CHECK(recs[0].gap == 18);
  CHECK(recs[0].width == 2.0 * m_d * 18);

  // keep the run of special-ups going: the next eligible step is tau + m_d + 1
  for (std::int64_t n = 19; n <= 40; ++n) log.push_back(up_event(n, StepKind::kSpecialUp, 0, n));
  recs = detect_renewals(log, m_d, false);
  REQUIRE(recs.size() >= 2);
  for (std::size_t j = 1; j < recs.size(); ++j) CHECK(recs[j].tau > recs[j - 1].tau + m_d);

  CHECK(detect_renewals({}, m_d, false).empty());
  CHECK_THROWS_AS(detect_renewals(log, 4, false), std::invalid_argument);
}

TEST_CASE("extract_observables: telescoping Y, Z absorption, widths") {
  std::vector<RenewalRecord> recs;
  auto rec = [&](int j, std::int64_t tau, std::int64_t ux, std::int64_t vx) {
    RenewalRecord r;
    r.j = j;
    r.tau = tau;
    r.hat[0] = make_site(ux, tau);
    r.hat[1] = make_site(vx, tau);
    r.gap = tau - (recs.empty() ? 0 : recs.back().tau);
    r.width = 2.0 * 9 * r.gap;
    recs.push_back(r);
  };
  rec(1, 20, 3, 5);
  rec(2, 40, 1, 1);
  rec(3, 55, 2, 2);

  Observables pair_obs = extract_observables(recs, true, 2);
  REQUIRE(pair_obs.Z.size() == 3);
  CHECK(pair_obs.Z[0][0] == -2);
  CHECK(pair_obs.Z[1][0] == 0);
  REQUIRE(pair_obs.nu.has_value());
  CHECK(*pair_obs.nu == 2);

  Observables single_obs = extract_observables(recs, false, 2);
  REQUIRE(single_obs.Y.size() == 2);
  std::int64_t sum = 0;
  for (const auto& y : single_obs.Y) sum += y[0];
  CHECK(sum == recs.back().hat[0].c[0] - recs.front().hat[0].c[0]);
  CHECK(single_obs.widths[1] == 2.0 * 9 * 20);

  CHECK(extract_observables({}, false, 2).Y.empty());
}

TEST_CASE("fresh state passes the invariant checks; planted violations fail") {
  FieldConfig cfg = FieldConfig::make(2, 42);
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(5, 0));
  CHECK(verify_exploration_invariants(s, cfg).pass);

  // Plant a field point strictly inside a history ball.
  FieldConfig planted = with_overrides(cfg, {{make_site(0, 1), make_vec(0.2, -0.5)}});
  ExplorationState bad = make_pair(planted, make_site(0, 0), make_site(5, 0));
  bad.history.baseline = 0.1;
  bad.history.balls.push_back({make_vec(0, -0.2), 2.0});  // (0.2, 0.5) is interior
  auto report = verify_exploration_invariants(bad, planted);
  CHECK_FALSE(report.pass);
  REQUIRE(!report.violations.empty());
  CHECK(report.violations[0].kind == "history-point");
}

TEST_CASE("exploration invariants hold along real runs") {
  for (int d : {2, 3}) {
    FieldConfig cfg = FieldConfig::make(d, 42);
    ExplorationParams params;
    params.track_used_sites = true;
    ExplorationState s =
        make_pair(cfg, make_site(0, 0, 0), make_site(d == 2 ? 4 : 3, d == 2 ? 0 : 2, 0), params);
    const int steps = d == 2 ? 3000 : 800;
    const double rmax = max_step_length(d, 1.0);
    for (int n = 0; n < steps; ++n) {
      Vec before[2] = {s.position[0].position, s.position[1].position};
      joint_step(s, cfg);
      for (int i = 0; i < 2; ++i) {
        const double inc = l1_dist(s.position[i].position, before[i], d);
        CHECK(inc <= rmax + 1e-12);
      }
      if (n % 10 == 0) {
        auto report = verify_exploration_invariants(s, cfg);
        if (!report.pass) {
          CAPTURE(report.violations[0].kind);
          CAPTURE(report.violations[0].detail);
        }
        REQUIRE(report.pass);
      }
    }
    CHECK(s.step_index == steps);
    CHECK(!s.used_sites.empty());
  }
}

TEST_CASE("online renewal detection agrees with the log scan") {
  FieldConfig cfg = FieldConfig::make(2, 7);
  ExplorationParams params;
  params.record_log = true;
  ExplorationState s = make_single(cfg, make_site(0, 0), params);
  for (int n = 0; n < 20000; ++n) joint_step(s, cfg);
  auto from_log = detect_renewals(s.log, s.m_d, false);
  REQUIRE(from_log.size() == s.renewals.size());
  for (std::size_t j = 0; j < from_log.size(); ++j) {
    CHECK(from_log[j].tau == s.renewals[j].tau);
    CHECK(from_log[j].gap == s.renewals[j].gap);
    CHECK(from_log[j].hat[0] == s.renewals[j].hat[0]);
  }
  MESSAGE("d=2 renewals in 20000 steps at delta=", params.delta, ": ", s.renewals.size());
}

TEST_CASE("ordered pair starts keep their orientation until absorption") {
  FieldConfig cfg = FieldConfig::make(2, 11);
  ExplorationState s = make_pair(cfg, make_site(0, 0), make_site(6, 0));
  for (int n = 0; n < 30000 && !s.coalesced; ++n) joint_step(s, cfg);
  CHECK(s.coalesced);
  for (int n = 0; n < 100; ++n) joint_step(s, cfg);
  Observables obs = extract_observables(s.renewals, true, 2);
  for (const auto& z : obs.Z) CHECK(z[0] <= 0);  // u starts left of v, non-crossing
  if (s.coalesced && !obs.Z.empty()) CHECK(obs.Z.back()[0] == 0);
}

TEST_CASE("independent pair renewals reduce to the marginals in the degenerate case") {
  FieldConfig cfg = FieldConfig::make(2, 21);
  auto sim = independent_pair_renewals(cfg, cfg, make_site(0, 0), make_site(0, 0), 15000);
  CHECK(sim.truncated);
  CHECK(sim.marginal_count_u == sim.marginal_count_v);
  CHECK(static_cast<std::int64_t>(sim.common.size()) == sim.marginal_count_u);
  for (const auto& item : sim.common) CHECK(item.hat_u == item.hat_v);

  // Different fields: every common step appears in both marginal sequences.
  FieldConfig cfg_b = FieldConfig::make(2, 22);
  auto sim2 = independent_pair_renewals(cfg, cfg_b, make_site(0, 0), make_site(0, 0), 15000);
  ExplorationState sa = make_single(cfg, make_site(0, 0));
  ExplorationState sb = make_single(cfg_b, make_site(0, 0));
  for (int n = 0; n < 15000; ++n) {
    joint_step(sa, cfg);
    joint_step(sb, cfg_b);
  }
  for (const auto& item : sim2.common) {
    bool in_a = false, in_b = false;
    for (const auto& r : sa.renewals) in_a = in_a || r.tau == item.step;
    for (const auto& r : sb.renewals) in_b = in_b || r.tau == item.step;
    CHECK(in_a);
    CHECK(in_b);
  }
}

TEST_CASE("default m_d honours the height-bound derivation") {
  CHECK(default_m_d(2) == 9);
  CHECK(default_m_d(3) == 10);
}
