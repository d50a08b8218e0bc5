#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "pdsf/dsf.hpp"
#include "pdsf/field.hpp"

// Joint exploration of one or two DSF paths with history-region bookkeeping,
// step classification (basic / up / special up), renewal detection, and the
// renewal-level observables Y_j, Z_j, W_j.

namespace pdsf {

// Upper half of the L1 ball: B+(apex, r) = { y : |y-apex|_1 <= r, y(d) >= apex(d) }.
// Radius 0 denotes the empty region.
struct UpperBall {
  Vec apex{};
  double radius = 0.0;
};

// Represented set: (union of balls) intersected with the half-plane above
// baseline. Balls entirely below the baseline are pruned eagerly; partial
// clipping happens at query time.
struct HistoryRegion {
  double baseline = 0.0;
  std::vector<UpperBall> balls;
};

double history_height(const HistoryRegion& h, int dim);
bool history_interior_contains(const HistoryRegion& h, const Vec& p, int dim);
// Adds B+(from, |to-from|_1) for each (from, to) move, then raises the
// baseline and prunes. Second legs of h^2 moves must not be passed in.
HistoryRegion update_history(HistoryRegion h, const std::vector<std::pair<Vec, Vec>>& moves,
                             double new_baseline, int dim);

// The pi/2 upward cone C(x) = { y : y(d) - x(d) > |y_bar - x_bar|_1 } is always
// disjoint from the history region; exact closed-form test per ball.
bool cone_intersects_history(const HistoryRegion& h, const Vec& x, int dim);

enum class StepKind { kBasic, kUp, kSpecialUp };

// Infinity-norm neighbourhood of w in the upper half-plane.
std::vector<LatticeSite> infinity_neighbourhood(const LatticeSite& w, int dim);
// Event A(w): every site of N(w) has its perturbed point in its own delta-cap.
bool event_A(const FieldConfig& cfg, const LatticeSite& w, double delta);

struct ExplorationParams {
  double delta = 2.0;   // cap radius for up / special-up steps
  int m_d = 0;          // 0 selects the dimension default
  bool record_log = false;
  bool track_used_sites = false;
};

int default_m_d(int dimension);  // 9 for d=2, 10 for d=3

struct StepEvent {
  std::int64_t index = 0;  // 1-based
  bool moved[2] = {false, false};
  StepKind kind = StepKind::kBasic;
  SitePoint after[2];
  bool a_flag[2] = {false, false};  // A(up-site of the pre-step position), per walker
  LatticeSite up_before[2];         // up-sites of the pre-step positions
  bool equal_floors_before = false;
};

struct RenewalRecord {
  int j = 0;  // 1-based renewal index
  std::int64_t tau = 0;
  LatticeSite hat[2];  // hat sites at tau (pair: both; single: slot 0)
  std::int64_t gap = 0;
  double width = 0.0;  // 2 * m_d * gap
};

struct ExplorationState {
  int dim = 2;
  bool pair_mode = false;
  SitePoint position[2];   // current g_n; at n = 0 a pseudo-point at the lattice start
  bool started[2] = {false, false};  // g_0 is a raw lattice location, not a field point
  bool coalesced = false;
  std::optional<std::int64_t> coalesced_step;
  HistoryRegion history;
  std::unordered_set<LatticeSite, LatticeSiteHash> used_sites;  // Gamma_n
  std::int64_t step_index = 0;
  std::vector<StepEvent> log;
  std::vector<RenewalRecord> renewals;  // detected online

  ExplorationParams params;
  int m_d = 9;
  // consecutive up steps ending at the current step
  std::int64_t up_run = 0;
  std::int64_t last_renewal_step = 0;

  const SitePoint& pos(int i) const { return position[i]; }
};

ExplorationState make_single(const FieldConfig& cfg, const LatticeSite& start,
                             const ExplorationParams& params = {});
ExplorationState make_pair(const FieldConfig& cfg, const LatticeSite& u, const LatticeSite& v,
                           const ExplorationParams& params = {});

// One transition of the joint exploration (single mode reduces to g' = h(g)).
void joint_step(ExplorationState& state, const FieldConfig& cfg);

// Classification of the step that produced `after` from the pre-step data.
StepKind classify_step(int dim, bool equal_floors_before, const LatticeSite up_sites_before[2],
                       int n_walkers, const SitePoint after[2], double delta,
                       const bool a_flags[2]);

// Scan of a recorded log; must agree with the online detection.
std::vector<RenewalRecord> detect_renewals(const std::vector<StepEvent>& log, int m_d,
                                           bool pair_mode);

struct Observables {
  // Y_{j+1} = hat(tau_{j+1}) - hat(tau_j), transverse coordinates, single path.
  std::vector<std::array<std::int64_t, 2>> Y;
  // Z_j = hat_u(tau_j) - hat_v(tau_j), transverse coordinates, pair mode.
  std::vector<std::array<std::int64_t, 2>> Z;
  std::vector<std::int64_t> gaps;
  std::vector<double> widths;
  std::optional<int> nu;  // first j >= 2 with Z_j = 0
};

Observables extract_observables(const std::vector<RenewalRecord>& records, bool pair_mode,
                                int dim);

struct InvariantViolation {
  std::string kind;
  std::string detail;
};

struct InvariantReport {
  bool pass = true;
  std::vector<InvariantViolation> violations;
};

// (a) interior of H contains no field point, (b) walker cones are unexplored,
// (c) L(H) <= m_d - 4. Failures are report entries, not exceptions.
InvariantReport verify_exploration_invariants(const ExplorationState& state,
                                              const FieldConfig& cfg);

// Simultaneous renewals of two independent single-path explorations: common
// values of the two marginal renewal step sequences.
struct SimultaneousRenewals {
  struct Item {
    std::int64_t step = 0;
    LatticeSite hat_u, hat_v;
  };
  std::vector<Item> common;
  std::int64_t marginal_count_u = 0;
  std::int64_t marginal_count_v = 0;
  bool truncated = false;  // step budget exhausted before the next match
};

SimultaneousRenewals independent_pair_renewals(const FieldConfig& field_a,
                                               const FieldConfig& field_b, const LatticeSite& u,
                                               const LatticeSite& v, std::int64_t step_budget,
                                               const ExplorationParams& params = {});

}  // namespace pdsf
