#include "pdsf/stats.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "pdsf/dual.hpp"
#include "pdsf/explore.hpp"
#include "pdsf/numeric.hpp"
#include "pdsf/scaling.hpp"
#include "pdsf/tracer.hpp"

namespace pdsf {

namespace {

// Stream tags for per-trial seed derivation; every random number is traceable
// to (field.seed, stream, trial index).
constexpr std::uint64_t kStreamCoalesce = 0x636f616cULL;
constexpr std::uint64_t kStreamRenewals = 0x72656e65ULL;
constexpr std::uint64_t kStreamIncrements = 0x696e6372ULL;
constexpr std::uint64_t kStreamDonsker = 0x646f6e73ULL;
constexpr std::uint64_t kStreamTreeness = 0x74726565ULL;
constexpr std::uint64_t kStreamFoster = 0x666f7374ULL;
constexpr std::uint64_t kStreamCoupling = 0x63706c67ULL;
constexpr std::uint64_t kStreamDual = 0x6475616cULL;
constexpr std::uint64_t kStreamEta = 0x65746121ULL;

FieldConfig field_from(const RunConfig& cfg) {
  const int d = static_cast<int>(cfg.get_int("field.dimension", 2));
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("field.seed", 0));
  const double rho = cfg.get_double("field.rho", 1.0);
  return FieldConfig::make(d, seed, rho);
}

FieldConfig trial_field(const FieldConfig& base, std::uint64_t stream, std::int64_t trial) {
  FieldConfig f = base;
  f.seed = derive_seed(base.seed, stream + static_cast<std::uint64_t>(trial));
  return f;
}

// The renewal-sampling experiments default to the shortest window the renewal
// rule admits (m_d = 5); the geometric invariants keep the height-bound value.
ExplorationParams explore_from(const RunConfig& cfg, int dim, bool renewal_default) {
  ExplorationParams p;
  p.delta = cfg.get_double("explore.delta", 2.0);
  const int fallback = renewal_default ? 5 : default_m_d(dim);
  p.m_d = static_cast<int>(cfg.get_int("explore.m_d", fallback));
  return p;
}

void echo_field(ExperimentReport& r, const FieldConfig& f) {
  r.config_echo.emplace_back("field.dimension", std::to_string(f.dimension));
  r.config_echo.emplace_back("field.seed", std::to_string(f.seed));
  r.config_echo.emplace_back("field.rho", format_double(f.half_width));
}

void echo_explore(ExperimentReport& r, const ExplorationParams& p) {
  r.config_echo.emplace_back("explore.delta", format_double(p.delta));
  r.config_echo.emplace_back("explore.m_d", std::to_string(p.m_d));
}

void parallel_trials(std::int64_t n, int workers,
                     const std::function<void(std::int64_t)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::int64_t i = w; i < n; i += workers) fn(i);
    });
  for (auto& t : pool) t.join();
}

Verdict make_verdict(std::string name, bool pass, double value, double threshold,
                     std::string detail = "") {
  return Verdict{std::move(name), pass, value, threshold, std::move(detail)};
}

std::vector<RenewalRecord> single_run_renewals(const FieldConfig& cfg,
                                               const ExplorationParams& params,
                                               std::int64_t budget) {
  ExplorationState s = make_single(cfg, make_site(0, 0, 0), params);
  for (std::int64_t n = 0; n < budget; ++n) joint_step(s, cfg);
  return std::move(s.renewals);
}

nlohmann::ordered_json site_point_json(const SitePoint& p, int dim) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json site = nlohmann::ordered_json::array();
  nlohmann::ordered_json off = nlohmann::ordered_json::array();
  nlohmann::ordered_json pos = nlohmann::ordered_json::array();
  for (int i = 0; i < dim; ++i) {
    site.push_back(p.site.c[i]);
    off.push_back(p.offset[i]);
    pos.push_back(p.position[i]);
  }
  j["site"] = site;
  j["offset"] = off;
  j["position"] = pos;
  return j;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const std::string& l : lines) out << l << "\n";
}

}  // namespace

// ---------------------------------------------------------------------------
// forest

ExperimentReport run_forest(const RunConfig& cfg, const std::string& out_dir) {
  FieldConfig field = field_from(cfg);
  const double hw = cfg.get_double("forest.half_width", 20.0);
  ExperimentReport r;
  r.experiment = "forest";
  echo_field(r, field);
  r.config_echo.emplace_back("forest.half_width", format_double(hw));

  Box window;
  for (int i = 0; i < field.dimension; ++i) {
    window.lo[i] = -hw;
    window.hi[i] = hw;
  }
  const auto points = points_in_box(field, window);
  const auto edges = build_forest(field, window);
  bool rising = true;
  for (const auto& e : edges)
    rising = rising && e.to.position[field.dimension - 1] > e.from.position[field.dimension - 1];

  r.tables.push_back({"counts",
                      {"points", "edges"},
                      {{static_cast<double>(points.size()), static_cast<double>(edges.size())}}});
  r.verdicts.push_back(make_verdict("one_edge_per_point", edges.size() == points.size(),
                                    static_cast<double>(edges.size()),
                                    static_cast<double>(points.size())));
  r.verdicts.push_back(make_verdict("edges_strictly_rising", rising, rising ? 1 : 0, 1));

  if (!out_dir.empty()) {
    std::vector<std::string> lines;
    lines.reserve(edges.size());
    for (const auto& e : edges) {
      nlohmann::ordered_json j;
      j["from"] = site_point_json(e.from, field.dimension);
      j["to"] = site_point_json(e.to, field.dimension);
      lines.push_back(j.dump());
    }
    const std::string path = out_dir + "/forest_d" + std::to_string(field.dimension) + "_seed" +
                             std::to_string(field.seed) + ".ndjson";
    write_lines(path, lines);
    r.notes.push_back("forest dump: " + path);
  }
  return r;
}

// ---------------------------------------------------------------------------
// coalesce

ExperimentReport run_coalesce(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  if (base.dimension != 2) throw std::invalid_argument("coalesce requires d=2");
  const auto dxs = cfg.get_ints("coalesce.dx", {2, 8});
  const double t_min = cfg.get_double("coalesce.t_min", 100.0);
  const double t_max = cfg.get_double("coalesce.t_max", 10000.0);
  const int t_points = static_cast<int>(cfg.get_int("coalesce.t_points", 9));
  const auto trials = cfg.get_int("coalesce.trials", 400);
  const auto step_cap = cfg.get_int("coalesce.step_cap", 400000);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));
  const double slope_tol = cfg.get_double("coalesce.slope_tol", 0.1);
  const double ratio_tol = cfg.get_double("coalesce.ratio_tol", 0.2);

  ExperimentReport r;
  r.experiment = "coalesce";
  echo_field(r, base);
  r.config_echo.emplace_back("coalesce.dx", join_ints(dxs));
  r.config_echo.emplace_back("coalesce.t_min", format_double(t_min));
  r.config_echo.emplace_back("coalesce.t_max", format_double(t_max));
  r.config_echo.emplace_back("coalesce.t_points", std::to_string(t_points));
  r.config_echo.emplace_back("coalesce.trials", std::to_string(trials));
  r.config_echo.emplace_back("coalesce.step_cap", std::to_string(step_cap));
  r.config_echo.emplace_back("coalesce.slope_tol", format_double(slope_tol));
  r.config_echo.emplace_back("coalesce.ratio_tol", format_double(ratio_tol));

  std::vector<double> t_grid;
  for (int i = 0; i < t_points; ++i)
    t_grid.push_back(t_min * std::pow(t_max / t_min, static_cast<double>(i) / (t_points - 1)));

  Table surv{"survival",
             {"dx", "t", "trials", "surv_conservative", "surv_optimistic", "unknown"},
             {}};
  std::vector<double> sup_stats;
  std::vector<double> slopes;
  std::int64_t censored_total = 0;

  for (std::size_t di = 0; di < dxs.size(); ++di) {
    const std::int64_t dx = dxs[di];
    std::vector<double> height(static_cast<std::size_t>(trials), 0.0);
    std::vector<char> coal(static_cast<std::size_t>(trials), 0);
    std::vector<double> reached(static_cast<std::size_t>(trials), 0.0);
    parallel_trials(trials, workers, [&](std::int64_t i) {
      FieldConfig f = trial_field(base, kStreamCoalesce + 1000 * di, i);
      PairCoalescence pc =
          trace_pair_coalescence(f, make_site(0, 0), make_site(dx, 0), t_max * 1.02, step_cap);
      coal[static_cast<std::size_t>(i)] = pc.coalesced ? 1 : 0;
      height[static_cast<std::size_t>(i)] = pc.height;
      reached[static_cast<std::size_t>(i)] = pc.reached_height;
    });

    std::vector<double> log_t, log_s;
    double sup_stat = 0.0;
    for (double t : t_grid) {
      std::int64_t above = 0, unknown = 0;
      for (std::int64_t i = 0; i < trials; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (coal[k]) {
          if (height[k] > t) ++above;
        } else if (reached[k] > t) {
          ++above;  // genuinely survived past t
        } else {
          ++unknown;  // step cap hit below t
        }
      }
      const double cons = static_cast<double>(above + unknown) / static_cast<double>(trials);
      const double opt = static_cast<double>(above) / static_cast<double>(trials);
      surv.rows.push_back(
          {static_cast<double>(dx), t, static_cast<double>(trials), cons, opt,
           static_cast<double>(unknown)});
      censored_total += unknown;
      sup_stat = std::max(sup_stat, cons * std::sqrt(t) / static_cast<double>(dx));
      if (cons > 0.0) {
        log_t.push_back(std::log(t));
        log_s.push_back(std::log(cons));
      }
    }
    sup_stats.push_back(sup_stat);
    if (log_t.size() >= 3) {
      slopes.push_back(num::linear_fit(log_t, log_s).slope);
    } else {
      slopes.push_back(0.0);
      r.notes.push_back("dx=" + std::to_string(dx) + ": survival hit zero too early for a fit");
    }
  }
  r.tables.push_back(surv);

  Table stat{"tail_stat", {"dx", "sup_p_sqrt_t_over_dx", "loglog_slope"}, {}};
  for (std::size_t di = 0; di < dxs.size(); ++di)
    stat.rows.push_back({static_cast<double>(dxs[di]), sup_stats[di], slopes[di]});
  r.tables.push_back(stat);

  for (std::size_t di = 0; di < dxs.size(); ++di) {
    r.verdicts.push_back(make_verdict(
        "loglog_slope_dx" + std::to_string(dxs[di]),
        std::abs(slopes[di] + 0.5) <= slope_tol, slopes[di], -0.5,
        "tolerance " + format_double(slope_tol)));
  }
  if (sup_stats.size() >= 2) {
    const double lo = *std::min_element(sup_stats.begin(), sup_stats.end());
    const double hi = *std::max_element(sup_stats.begin(), sup_stats.end());
    const double ratio = lo > 0 ? hi / lo : 1e300;
    r.verdicts.push_back(make_verdict("sup_stat_ratio", ratio <= 1.0 + ratio_tol, ratio,
                                      1.0 + ratio_tol));
  }
  if (censored_total > 0)
    r.notes.push_back("censored (unknown) survival entries: " + std::to_string(censored_total));
  return r;
}

// ---------------------------------------------------------------------------
// renewals

ExperimentReport run_renewals(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const auto trials = cfg.get_int("renewals.trials", 8);
  const auto budget = cfg.get_int("renewals.budget", 2000000);
  const double r2_min = cfg.get_double("renewals.r2_min", 0.98);
  const double floor = cfg.get_double("renewals.survival_floor", 1e-3);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  ExperimentReport r;
  r.experiment = "renewals";
  echo_field(r, base);
  echo_explore(r, params);
  r.config_echo.emplace_back("renewals.trials", std::to_string(trials));
  r.config_echo.emplace_back("renewals.budget", std::to_string(budget));
  r.config_echo.emplace_back("renewals.r2_min", format_double(r2_min));
  r.config_echo.emplace_back("renewals.survival_floor", format_double(floor));

  std::vector<std::vector<std::int64_t>> per_trial(static_cast<std::size_t>(trials));
  parallel_trials(trials, workers, [&](std::int64_t i) {
    FieldConfig f = trial_field(base, kStreamRenewals, i);
    auto recs = single_run_renewals(f, params, budget);
    auto& gaps = per_trial[static_cast<std::size_t>(i)];
    for (std::size_t j = 1; j < recs.size(); ++j) gaps.push_back(recs[j].gap);
  });

  std::vector<double> gaps;
  int shortfalls = 0;
  for (const auto& g : per_trial) {
    if (g.empty()) ++shortfalls;
    for (auto v : g) gaps.push_back(static_cast<double>(v));
  }
  std::sort(gaps.begin(), gaps.end());
  const std::size_t n = gaps.size();

  Table curve{"gap_survival", {"gap", "survival"}, {}};
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = static_cast<double>(n - i) / static_cast<double>(n);
    if (s < floor) break;
    if (i == 0 || gaps[i] != gaps[i - 1]) {
      xs.push_back(gaps[i]);
      ys.push_back(std::log(s));
    }
  }
  const std::size_t stride = std::max<std::size_t>(1, xs.size() / 200);
  for (std::size_t i = 0; i < xs.size(); i += stride)
    curve.rows.push_back({xs[i], std::exp(ys[i])});
  r.tables.push_back(curve);

  double r2 = 0.0, rate = 0.0;
  if (xs.size() >= 3) {
    auto fit = num::linear_fit(xs, ys);
    r2 = fit.r2;
    rate = -fit.slope;
  }
  Table summary{"summary", {"gaps", "mean_gap", "fit_rate", "fit_r2"}, {}};
  summary.rows.push_back({static_cast<double>(n), num::mean(gaps), rate, r2});
  r.tables.push_back(summary);

  r.verdicts.push_back(make_verdict("log_survival_linear_r2", r2 >= r2_min && xs.size() >= 3, r2,
                                    r2_min,
                                    "fit over survival >= " + format_double(floor)));
  if (shortfalls > 0)
    r.notes.push_back(std::to_string(shortfalls) + " runs produced < 2 renewals (shortfall)");
  r.notes.push_back("pooled gaps: " + std::to_string(n));
  return r;
}

// ---------------------------------------------------------------------------
// increments

ExperimentReport run_increments(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const auto trials = cfg.get_int("increments.trials", 8);
  const auto budget = cfg.get_int("increments.budget", 2000000);
  const auto target = cfg.get_int("increments.samples", 500);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));
  const double alpha = cfg.get_double("increments.ks_alpha", 0.01);

  ExperimentReport r;
  r.experiment = "increments";
  echo_field(r, base);
  echo_explore(r, params);
  r.config_echo.emplace_back("increments.trials", std::to_string(trials));
  r.config_echo.emplace_back("increments.budget", std::to_string(budget));
  r.config_echo.emplace_back("increments.samples", std::to_string(target));
  r.config_echo.emplace_back("increments.ks_alpha", format_double(alpha));

  const int d = base.dimension;
  std::vector<Observables> per_trial(static_cast<std::size_t>(trials));
  parallel_trials(trials, workers, [&](std::int64_t i) {
    FieldConfig f = trial_field(base, kStreamIncrements, i);
    per_trial[static_cast<std::size_t>(i)] =
        extract_observables(single_run_renewals(f, params, budget), false, d);
  });

  std::vector<double> y1, y2;  // first and (d=3) second transverse coordinates
  for (const auto& obs : per_trial)
    for (const auto& y : obs.Y) {
      y1.push_back(static_cast<double>(y[0]));
      if (d == 3) y2.push_back(static_cast<double>(y[1]));
    }
  const std::size_t n = y1.size();
  r.notes.push_back("Y samples collected: " + std::to_string(n));

  Table summary{"summary", {"n", "mean", "variance", "lag1_autocorr"}, {}};
  if (n >= 3) {
    summary.rows.push_back({static_cast<double>(n), num::mean(y1), num::variance(y1),
                            num::lag1_autocorrelation(y1)});
  }
  r.tables.push_back(summary);

  r.verdicts.push_back(make_verdict("sample_count", static_cast<std::int64_t>(n) >= target,
                                    static_cast<double>(n), static_cast<double>(target),
                                    "renewal shortfall if below target"));
  if (n >= 10) {
    std::vector<double> neg(y1);
    for (double& v : neg) v = -v;
    const double d_sym = num::ks_two_sample_statistic(y1, neg);
    const double p_sym = num::ks_pvalue_two_sample(d_sym, n, n);
    r.verdicts.push_back(
        make_verdict("symmetry_ks", p_sym >= alpha, p_sym, alpha, "sign-flip two-sample KS"));

    const double se = num::std_error_of_mean(y1);
    r.verdicts.push_back(make_verdict("mean_within_3se", std::abs(num::mean(y1)) <= 3 * se,
                                      num::mean(y1), 3 * se));

    const double l1 = num::lag1_autocorrelation(y1);
    const double bound = 3.0 / std::sqrt(static_cast<double>(n));
    r.verdicts.push_back(make_verdict("lag1_autocorr", std::abs(l1) <= bound, l1, bound));

    std::vector<double> first_half(y1.begin(), y1.begin() + n / 2);
    std::vector<double> second_half(y1.begin() + n / 2, y1.end());
    const double d_split = num::ks_two_sample_statistic(first_half, second_half);
    const double p_split =
        num::ks_pvalue_two_sample(d_split, first_half.size(), second_half.size());
    r.verdicts.push_back(make_verdict("restart_split_ks", p_split >= alpha, p_split, alpha,
                                      "first half vs second half of the Y sequence"));

    if (d == 3) {
      std::vector<double> prod(n);
      for (std::size_t i = 0; i < n; ++i) prod[i] = y1[i] * y2[i];
      const double cross = num::mean(prod);
      const double cross_se = num::std_error_of_mean(prod);
      r.verdicts.push_back(make_verdict("cross_moment", std::abs(cross) <= 3 * cross_se, cross,
                                        3 * cross_se, "E[Y(1)Y(2)]"));
      const double d_xy = num::ks_two_sample_statistic(y1, y2);
      const double p_xy = num::ks_pvalue_two_sample(d_xy, n, n);
      r.verdicts.push_back(
          make_verdict("coordinate_exchange_ks", p_xy >= alpha, p_xy, alpha, "Y(1) vs Y(2)"));
    }
  } else {
    r.verdicts.push_back(make_verdict("symmetry_ks", false, 0.0, alpha,
                                      "insufficient samples (renewal shortfall)"));
  }
  return r;
}

// ---------------------------------------------------------------------------
// donsker

ExperimentReport run_donsker(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const int n_scale = static_cast<int>(cfg.get_int("donsker.n", 8));
  const auto trials = cfg.get_int("donsker.trials", 200);
  const auto est_trials = cfg.get_int("donsker.est_trials", 60);
  const auto est_budget = cfg.get_int("donsker.est_budget", 2000000);
  const auto step_budget = cfg.get_int("donsker.step_budget", 2000000000);
  const double ks_max = cfg.get_double("donsker.ks_max", 0.05);
  const double r2_min = cfg.get_double("donsker.var_r2_min", 0.99);
  const double var_tol = cfg.get_double("donsker.var_tol", 0.10);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));
  const std::vector<double> ts = cfg.get_doubles("donsker.t", {0.25, 0.5, 1.0});

  ExperimentReport r;
  r.experiment = "donsker";
  echo_field(r, base);
  echo_explore(r, params);
  r.config_echo.emplace_back("donsker.n", std::to_string(n_scale));
  r.config_echo.emplace_back("donsker.trials", std::to_string(trials));
  r.config_echo.emplace_back("donsker.est_trials", std::to_string(est_trials));
  r.config_echo.emplace_back("donsker.est_budget", std::to_string(est_budget));
  r.config_echo.emplace_back("donsker.step_budget", std::to_string(step_budget));
  r.config_echo.emplace_back("donsker.t", join_doubles(ts));
  r.config_echo.emplace_back("donsker.ks_max", format_double(ks_max));
  r.config_echo.emplace_back("donsker.var_r2_min", format_double(r2_min));
  r.config_echo.emplace_back("donsker.var_tol", format_double(var_tol));

  FieldConfig est_base = base;
  est_base.seed = derive_seed(base.seed, kStreamDonsker);
  GammaSigmaEstimate est =
      estimate_gamma_sigma(est_base, static_cast<int>(est_trials), est_budget, params);
  Table estt{"gamma_sigma",
             {"gamma_hat", "sigma_hat", "gamma_ci_half", "sigma2_ci_half", "trials_used",
              "shortfalls"},
             {{est.gamma_hat, est.sigma_hat, est.gamma_ci_half, est.sigma2_ci_half,
               static_cast<double>(est.trials_used), static_cast<double>(est.shortfalls)}}};
  r.tables.push_back(estt);
  if (est.shortfalls > 0)
    r.notes.push_back("gamma/sigma estimation shortfalls: " + std::to_string(est.shortfalls));
  if (est.trials_used < 2 || est.gamma_hat <= 0 || est.sigma_hat <= 0) {
    r.verdicts.push_back(make_verdict("normalizers_estimated", false,
                                      static_cast<double>(est.trials_used), 2,
                                      "renewal shortfall: no usable gamma/sigma"));
    return r;
  }

  const double horizon = n_scale * static_cast<double>(n_scale) * est.gamma_hat;
  const double projected = static_cast<double>(trials) * horizon / 0.7;
  if (step_budget > 0 && projected > static_cast<double>(step_budget)) {
    std::ostringstream os;
    os << "projected cost " << format_double(projected) << " h-steps exceeds donsker.step_budget "
       << step_budget << " (gamma_hat = " << format_double(est.gamma_hat)
       << ", horizon = " << format_double(horizon) << ")";
    r.notes.push_back(os.str());
    r.verdicts.push_back(make_verdict("feasible_within_budget", false, projected,
                                      static_cast<double>(step_budget),
                                      "renewal-scale normalizers make n^2*gamma unreachable"));
    return r;
  }

  std::vector<double> heights;
  for (double t : ts) heights.push_back(horizon * t / ts.back() * ts.back());
  for (std::size_t i = 0; i < ts.size(); ++i) heights[i] = n_scale * n_scale * est.gamma_hat * ts[i];

  std::vector<std::vector<double>> samples(ts.size(),
                                           std::vector<double>(static_cast<std::size_t>(trials)));
  parallel_trials(trials, workers, [&](std::int64_t i) {
    FieldConfig f = trial_field(base, kStreamDonsker + 1, i);
    Vec origin{};
    const auto vals = transverse_at_heights(f, origin, heights);
    for (std::size_t k = 0; k < ts.size(); ++k)
      samples[k][static_cast<std::size_t>(i)] = vals[k] / (n_scale * est.sigma_hat);
  });

  Table marg{"marginal", {"t", "mean", "variance", "ks_to_normal"}, {}};
  std::vector<double> vars;
  double ks_at_1 = 1.0;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    std::vector<double> normalized(samples[k]);
    const double v = num::variance(samples[k]);
    vars.push_back(v);
    // KS against N(0, t): standardize by sqrt(t)
    for (double& x : normalized) x /= std::sqrt(ts[k]);
    const double ks = num::ks_statistic_normal(normalized);
    if (ts[k] == ts.back()) ks_at_1 = ks;
    marg.rows.push_back({ts[k], num::mean(samples[k]), v, ks});
  }
  r.tables.push_back(marg);

  auto fit = num::linear_fit(ts, vars);
  r.verdicts.push_back(make_verdict("ks_marginal", ks_at_1 <= ks_max, ks_at_1, ks_max,
                                    "pi_n(t_last) vs standard normal"));
  r.verdicts.push_back(make_verdict("variance_linear_r2", fit.r2 >= r2_min, fit.r2, r2_min));
  r.verdicts.push_back(make_verdict("variance_at_1", std::abs(vars.back() / ts.back() - 1.0) <= var_tol,
                                    vars.back() / ts.back(), 1.0,
                                    "tolerance " + format_double(var_tol)));
  return r;
}

// ---------------------------------------------------------------------------
// treeness

ExperimentReport run_treeness(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  const int k = static_cast<int>(cfg.get_int("treeness.k", 5));
  const double spread = cfg.get_double("treeness.spread", 20.0);
  const auto trials = cfg.get_int("treeness.trials", 200);
  const auto budgets = cfg.get_ints("treeness.budgets", {cfg.get_int("treeness.budget", 100000)});
  const double min_fraction = cfg.get_double("treeness.min_fraction", 0.99);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  if (k < 1) throw std::invalid_argument("treeness.k must be >= 1");

  ExperimentReport r;
  r.experiment = "treeness";
  echo_field(r, base);
  r.config_echo.emplace_back("treeness.k", std::to_string(k));
  r.config_echo.emplace_back("treeness.spread", format_double(spread));
  r.config_echo.emplace_back("treeness.trials", std::to_string(trials));
  r.config_echo.emplace_back("treeness.budgets", join_ints(budgets));
  r.config_echo.emplace_back("treeness.min_fraction", format_double(min_fraction));

  std::vector<LatticeSite> starts;
  for (int i = 0; i < k; ++i) {
    const double frac = k == 1 ? 0.5 : static_cast<double>(i) / (k - 1);
    const auto x = static_cast<std::int64_t>(std::llround(-spread / 2.0 + spread * frac));
    if (base.dimension == 2)
      starts.push_back(make_site(x, 0));
    else
      starts.push_back(make_site(x, x, 0));
  }

  Table frac{"coalesced_fraction",
             {"budget", "trials", "fraction", "censored", "merge_height_p50", "merge_height_p90"},
             {}};
  std::vector<double> fractions;
  for (std::size_t bi = 0; bi < budgets.size(); ++bi) {
    const std::int64_t budget = budgets[bi];
    std::vector<char> ok(static_cast<std::size_t>(trials), 0);
    std::vector<double> merge_h(static_cast<std::size_t>(trials), 0.0);
    parallel_trials(trials, workers, [&](std::int64_t i) {
      FieldConfig f = trial_field(base, kStreamTreeness, i);  // same fields across budgets
      MultiCoalescence mc = trace_multi_coalescence(f, starts, 1e18, budget);
      ok[static_cast<std::size_t>(i)] = mc.all_coalesced ? 1 : 0;
      merge_h[static_cast<std::size_t>(i)] = mc.last_merge_height;
    });
    std::int64_t coalesced = 0;
    std::vector<double> heights;
    for (std::int64_t i = 0; i < trials; ++i)
      if (ok[static_cast<std::size_t>(i)]) {
        ++coalesced;
        heights.push_back(merge_h[static_cast<std::size_t>(i)]);
      }
    std::sort(heights.begin(), heights.end());
    const double fraction = k == 1 ? 1.0 : static_cast<double>(coalesced) / trials;
    fractions.push_back(fraction);
    auto quant = [&](double q) {
      if (heights.empty()) return 0.0;
      return heights[static_cast<std::size_t>(q * (heights.size() - 1))];
    };
    frac.rows.push_back({static_cast<double>(budget), static_cast<double>(trials), fraction,
                         static_cast<double>(trials - coalesced), quant(0.5), quant(0.9)});
  }
  r.tables.push_back(frac);

  if (budgets.size() == 1) {
    r.verdicts.push_back(make_verdict("all_coalesced_fraction", fractions[0] >= min_fraction,
                                      fractions[0], min_fraction));
  } else {
    bool monotone = true;
    for (std::size_t i = 1; i < fractions.size(); ++i)
      monotone = monotone && fractions[i] >= fractions[i - 1];
    r.verdicts.push_back(make_verdict("fraction_monotone_in_budget", monotone,
                                      fractions.back(), fractions.front(),
                                      "non-decreasing along treeness.budgets"));
  }
  const std::int64_t censored = [&] {
    std::int64_t c = 0;
    for (const auto& row : frac.rows) c += static_cast<std::int64_t>(row[3]);
    return c;
  }();
  if (censored > 0) r.notes.push_back("censored trials (budget exhausted): " + std::to_string(censored));
  return r;
}

// ---------------------------------------------------------------------------
// foster

ExperimentReport run_foster(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  if (base.dimension != 3) throw std::invalid_argument("foster requires d=3");
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const auto shell_edges = cfg.get_doubles("foster.shells", {20, 40, 80});
  const auto trials = cfg.get_int("foster.trials", 4);
  const auto budget = cfg.get_int("foster.budget", 2000000);
  const auto target = cfg.get_int("foster.transitions", 10000);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  ExperimentReport r;
  r.experiment = "foster";
  echo_field(r, base);
  echo_explore(r, params);
  r.config_echo.emplace_back("foster.shells", join_doubles(shell_edges));
  r.config_echo.emplace_back("foster.trials", std::to_string(trials));
  r.config_echo.emplace_back("foster.budget", std::to_string(budget));
  r.config_echo.emplace_back("foster.transitions", std::to_string(target));

  const std::size_t n_shells = shell_edges.size() >= 2 ? shell_edges.size() - 1 : 0;
  if (n_shells == 0) throw std::invalid_argument("foster.shells needs at least two edges");

  auto f_of = [](double z2) { return std::sqrt(std::log1p(z2)); };

  // start separations aimed at the shell midpoints
  std::vector<std::vector<double>> drops(n_shells);
  std::vector<std::int64_t> renewal_counts(static_cast<std::size_t>(trials), 0);
  parallel_trials(trials, workers, [&](std::int64_t i) {
    const std::size_t shell = static_cast<std::size_t>(i) % n_shells;
    const double mid = 0.5 * (shell_edges[shell] + shell_edges[shell + 1]);
    const auto dx = static_cast<std::int64_t>(std::llround(mid / std::sqrt(2.0)));
    FieldConfig f = trial_field(base, kStreamFoster, i);
    ExplorationState s = make_pair(f, make_site(0, 0, 0), make_site(dx, dx, 0), params);
    for (std::int64_t n = 0; n < budget && !s.coalesced; ++n) joint_step(s, f);
    renewal_counts[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(s.renewals.size());
    Observables obs = extract_observables(s.renewals, true, 3);
    for (std::size_t j = 0; j + 1 < obs.Z.size(); ++j) {
      const double z2 = static_cast<double>(obs.Z[j][0] * obs.Z[j][0] +
                                            obs.Z[j][1] * obs.Z[j][1]);
      const double z = std::sqrt(z2);
      if (z == 0.0) continue;  // absorbed pairs are excluded from the conditional
      for (std::size_t sh = 0; sh < n_shells; ++sh) {
        if (z >= shell_edges[sh] && z < shell_edges[sh + 1]) {
          const double z2n = static_cast<double>(obs.Z[j + 1][0] * obs.Z[j + 1][0] +
                                                 obs.Z[j + 1][1] * obs.Z[j + 1][1]);
          drops[sh].push_back(f_of(z2n) - f_of(z2));
        }
      }
    }
  });

  Table t{"drift", {"shell_lo", "shell_hi", "transitions", "drift", "se"}, {}};
  bool all_pass = true;
  std::int64_t total = 0;
  for (std::size_t sh = 0; sh < n_shells; ++sh) {
    const double est = drops[sh].empty() ? 0.0 : num::mean(drops[sh]);
    const double se = num::std_error_of_mean(drops[sh]);
    total += static_cast<std::int64_t>(drops[sh].size());
    t.rows.push_back({shell_edges[sh], shell_edges[sh + 1],
                      static_cast<double>(drops[sh].size()), est, se});
    const bool enough = static_cast<std::int64_t>(drops[sh].size()) >= target;
    const bool negative = est < 0.0 && std::abs(est) > 2.0 * se;
    if (!enough)
      r.notes.push_back("shell [" + format_double(shell_edges[sh]) + "," +
                        format_double(shell_edges[sh + 1]) + ") sparse: " +
                        std::to_string(drops[sh].size()) + " transitions (target " +
                        std::to_string(target) + ")");
    all_pass = all_pass && enough && negative;
    r.verdicts.push_back(make_verdict(
        "drift_negative_shell" + std::to_string(sh), enough && negative, est, 0.0,
        enough ? "[est] < 0 with |est| > 2 SE" : "sparse shell"));
  }
  r.tables.push_back(t);
  std::int64_t total_renewals = 0;
  for (auto c : renewal_counts) total_renewals += c;
  r.notes.push_back("joint renewals observed: " + std::to_string(total_renewals) +
                    " across " + std::to_string(trials) + " runs of " + std::to_string(budget) +
                    " steps (d=3 joint renewal events require an 18-site per-endpoint "
                    "coincidence of probability <= 2^-18 each, so the spec transition "
                    "target is orders of magnitude beyond any step budget)");
  return r;
}

// ---------------------------------------------------------------------------
// coupling

ExperimentReport run_coupling(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  if (base.dimension != 3) throw std::invalid_argument("coupling requires d=3");
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const auto r_ladder = cfg.get_doubles("coupling.r", {5, 10, 20});
  const auto trials = cfg.get_int("coupling.trials", 20);
  const auto budget = cfg.get_int("coupling.budget", 200000);
  const auto horizon = cfg.get_int("coupling.horizon", 2000);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  ExperimentReport rep;
  rep.experiment = "coupling";
  echo_field(rep, base);
  echo_explore(rep, params);
  rep.config_echo.emplace_back("coupling.r", join_doubles(r_ladder));
  rep.config_echo.emplace_back("coupling.trials", std::to_string(trials));
  rep.config_echo.emplace_back("coupling.budget", std::to_string(budget));
  rep.config_echo.emplace_back("coupling.horizon", std::to_string(horizon));

  const double rmax_ladder = *std::max_element(r_ladder.begin(), r_ladder.end());
  const auto sep = static_cast<std::int64_t>(std::llround(3.0 * rmax_ladder + 1.0));
  const LatticeSite u = make_site(0, 0, 0);
  const LatticeSite v = make_site(sep, 0, 0);

  Table t{"coupling",
          {"r", "trials", "coupled_ok", "censored", "horizon_prefix_equal"},
          {}};
  std::vector<double> literal_freq;
  for (std::size_t ri = 0; ri < r_ladder.size(); ++ri) {
    const double radius = r_ladder[ri];
    std::vector<char> ok(static_cast<std::size_t>(trials), 0);
    std::vector<char> censored(static_cast<std::size_t>(trials), 0);
    std::vector<char> prefix_eq(static_cast<std::size_t>(trials), 0);
    parallel_trials(trials, workers, [&](std::int64_t i) {
      FieldConfig fa = trial_field(base, kStreamCoupling, 4 * i);
      FieldConfig fb = trial_field(base, kStreamCoupling, 4 * i + 1);
      FieldConfig fc = trial_field(base, kStreamCoupling, 4 * i + 2);
      FieldConfig mix = coupled_field(fa, fb, fc, u, v, radius);

      // independent marginal runs and their simultaneous renewals
      ExplorationState su = make_single(fa, u, params);
      ExplorationState sv = make_single(fb, v, params);
      std::vector<LatticeSite> iu, iv;  // vertex sequences
      for (std::int64_t n = 0; n < budget; ++n) {
        joint_step(su, fa);
        joint_step(sv, fb);
        if (static_cast<std::int64_t>(iu.size()) < horizon) iu.push_back(su.position[0].site);
        if (static_cast<std::int64_t>(iv.size()) < horizon) iv.push_back(sv.position[0].site);
      }
      std::optional<std::int64_t> tau_ind;
      {
        std::size_t a = 0, b = 0;
        while (a < su.renewals.size() && b < sv.renewals.size()) {
          if (su.renewals[a].tau == sv.renewals[b].tau) {
            tau_ind = su.renewals[a].tau;
            break;
          }
          if (su.renewals[a].tau < sv.renewals[b].tau)
            ++a;
          else
            ++b;
        }
      }

      // joint run on the coupled field
      ExplorationState sj = make_pair(mix, u, v, params);
      std::vector<LatticeSite> ju, jv;
      LatticeSite last_u = u, last_v = v;
      for (std::int64_t n = 0;
           n < budget && sj.renewals.empty() &&
           static_cast<std::int64_t>(ju.size()) < budget;
           ++n) {
        joint_step(sj, mix);
        if (!(sj.position[0].site == last_u)) {
          ju.push_back(sj.position[0].site);
          last_u = sj.position[0].site;
        }
        if (!(sj.position[1].site == last_v)) {
          jv.push_back(sj.position[1].site);
          last_v = sj.position[1].site;
        }
      }
      std::optional<std::int64_t> tau_joint;
      if (!sj.renewals.empty()) tau_joint = sj.renewals.front().tau;

      auto prefix_agrees = [](const std::vector<LatticeSite>& a,
                              const std::vector<LatticeSite>& b, std::size_t upto) {
        const std::size_t m = std::min({a.size(), b.size(), upto});
        for (std::size_t kk = 0; kk < m; ++kk)
          if (!(a[kk] == b[kk])) return false;
        return true;
      };
      const auto hz = static_cast<std::size_t>(horizon);
      prefix_eq[static_cast<std::size_t>(i)] =
          prefix_agrees(iu, ju, hz) && prefix_agrees(iv, jv, hz) ? 1 : 0;

      if (!tau_ind || !tau_joint) {
        censored[static_cast<std::size_t>(i)] = 1;
        return;
      }
      ok[static_cast<std::size_t>(i)] =
          (*tau_ind == *tau_joint &&
           prefix_agrees(iu, ju, static_cast<std::size_t>(*tau_joint)) &&
           prefix_agrees(iv, jv, static_cast<std::size_t>(*tau_joint)))
              ? 1
              : 0;
    });
    std::int64_t n_ok = 0, n_cens = 0, n_pref = 0;
    for (std::int64_t i = 0; i < trials; ++i) {
      n_ok += ok[static_cast<std::size_t>(i)];
      n_cens += censored[static_cast<std::size_t>(i)];
      n_pref += prefix_eq[static_cast<std::size_t>(i)];
    }
    literal_freq.push_back(static_cast<double>(n_ok) / trials);
    t.rows.push_back({radius, static_cast<double>(trials), static_cast<double>(n_ok),
                      static_cast<double>(n_cens), static_cast<double>(n_pref) / trials});
    if (n_cens > 0)
      rep.notes.push_back("r=" + format_double(radius) + ": " + std::to_string(n_cens) +
                          " trials censored before a first (joint or simultaneous) renewal");
  }
  rep.tables.push_back(t);

  bool monotone = true;
  for (std::size_t i = 1; i < literal_freq.size(); ++i)
    monotone = monotone && literal_freq[i] >= literal_freq[i - 1];
  const bool any_success =
      std::any_of(literal_freq.begin(), literal_freq.end(), [](double f) { return f > 0; });
  rep.verdicts.push_back(make_verdict("coupling_freq_monotone", monotone && any_success,
                                      literal_freq.back(), literal_freq.front(),
                                      any_success ? "" : "all trials censored (d=3 renewal rarity)"));
  return rep;
}

// ---------------------------------------------------------------------------
// dual

namespace {

// Per-height diffusivity from direct displacement probes (used for the margin rule).
double estimate_height_diffusivity(const FieldConfig& base, double height, int probes) {
  std::vector<double> disp;
  for (int i = 0; i < probes; ++i) {
    FieldConfig f = trial_field(base, kStreamDual + 7777, i);
    Vec origin{};
    disp.push_back(transverse_at_heights(f, origin, {height})[0]);
  }
  return num::variance(disp) / height;
}

}  // namespace

ExperimentReport run_dual(const RunConfig& cfg, const std::string& out_dir) {
  FieldConfig base = field_from(cfg);
  if (base.dimension != 2) throw std::invalid_argument("dual requires d=2");
  const auto sizes = cfg.get_ints("dual.window_sizes", {50, 100, 200});
  const auto seeds = cfg.get_int("dual.seeds", 20);
  const auto probe_heights = cfg.get_ints("dual.probe_heights", {100, 200, 400});
  const auto probe_width = cfg.get_int("dual.probe_width", 100);
  const auto probe_seeds = cfg.get_int("dual.probe_seeds", seeds);
  const auto sample_paths = cfg.get_int("dual.sample_paths", 40);
  double margin = cfg.get_double("dual.margin", 0.0);
  const bool dump = cfg.get_int("dual.dump", out_dir.empty() ? 0 : 1) != 0;
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  ExperimentReport r;
  r.experiment = "dual";
  echo_field(r, base);
  r.config_echo.emplace_back("dual.window_sizes", join_ints(sizes));
  r.config_echo.emplace_back("dual.seeds", std::to_string(seeds));
  r.config_echo.emplace_back("dual.probe_heights", join_ints(probe_heights));
  r.config_echo.emplace_back("dual.probe_width", std::to_string(probe_width));
  r.config_echo.emplace_back("dual.probe_seeds", std::to_string(probe_seeds));
  r.config_echo.emplace_back("dual.sample_paths", std::to_string(sample_paths));

  const double max_extent = static_cast<double>(
      std::max(*std::max_element(sizes.begin(), sizes.end()),
               *std::max_element(probe_heights.begin(), probe_heights.end())));
  const double diffusivity = estimate_height_diffusivity(base, 200.0, 30);
  auto margin_for = [&](double height) {
    return std::max(12.0, 3.0 * std::sqrt(height * std::max(0.1, diffusivity)));
  };
  if (margin <= 0.0) margin = margin_for(max_extent);
  r.config_echo.emplace_back("dual.margin", format_double(margin));
  r.notes.push_back("estimated per-height diffusivity: " + format_double(diffusivity));

  // consistency checks over windows
  std::int64_t bad_degree = 0, bad_descent = 0, crossings = 0, margin_failures = 0;
  Table windows{"windows", {"size", "seeds", "dual_vertices", "crossing_pairs"}, {}};
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const double w = static_cast<double>(sizes[si]);
    std::vector<std::int64_t> verts(static_cast<std::size_t>(seeds), 0);
    std::vector<std::int64_t> cross(static_cast<std::size_t>(seeds), 0);
    std::vector<std::int64_t> degree(static_cast<std::size_t>(seeds), 0);
    std::vector<std::int64_t> descent(static_cast<std::size_t>(seeds), 0);
    std::vector<char> failed(static_cast<std::size_t>(seeds), 0);
    parallel_trials(seeds, workers, [&](std::int64_t sdx) {
      FieldConfig f = trial_field(base, kStreamDual + 100 * si, sdx);
      Box window;
      window.lo = make_vec(-w / 2, 0);
      window.hi = make_vec(w / 2, w);
      try {
        DualForest forest = build_dual(f, window, margin_for(w));
        verts[static_cast<std::size_t>(sdx)] = static_cast<std::int64_t>(forest.vertices.size());
        if (forest.edges.size() != forest.vertices.size())
          degree[static_cast<std::size_t>(sdx)] = 1;
        for (const DualEdge& e : forest.edges)
          if (!(e.to_position[1] < forest.vertices[static_cast<std::size_t>(e.from)].position[1]))
            descent[static_cast<std::size_t>(sdx)] += 1;

        // primal-dual crossing scan on sampled paths
        StopRule stop;
        stop.height_above = window.hi[1];
        std::vector<DsfPath> primal;
        const auto pts = points_in_box(f, window);
        const std::size_t stride_p =
            std::max<std::size_t>(1, pts.size() / static_cast<std::size_t>(sample_paths));
        for (std::size_t pi = 0; pi < pts.size(); pi += stride_p)
          primal.push_back(trace_path_from(f, pts[pi], stop));
        std::vector<DualPath> duals;
        const std::size_t stride_d = std::max<std::size_t>(
            1, forest.vertices.size() / static_cast<std::size_t>(sample_paths));
        for (std::size_t di = 0; di < forest.vertices.size(); di += stride_d)
          duals.push_back(trace_dual_path(f, *forest.index, forest.vertices[di], window.lo[1]));
        std::int64_t c = 0;
        for (const auto& pp : primal)
          for (const auto& dp : duals)
            if (dual_primal_cross(pp, dp)) ++c;
        cross[static_cast<std::size_t>(sdx)] = c;

        if (dump && si + 1 == sizes.size() && sdx == 0 && !out_dir.empty()) {
          std::vector<std::string> lines;
          for (std::size_t vi = 0; vi < forest.vertices.size(); ++vi) {
            const DualVertex& dv = forest.vertices[vi];
            nlohmann::ordered_json j;
            j["kind"] = "vertex";
            j["position"] = {dv.position[0], dv.position[1]};
            j["parent"] = {dv.parent.site.c[0], dv.parent.site.c[1]};
            j["side"] = dv.side == Side::kRight ? "right" : "left";
            lines.push_back(j.dump());
          }
          for (const DualEdge& e : forest.edges) {
            nlohmann::ordered_json j;
            j["kind"] = "edge";
            j["from"] = {forest.vertices[static_cast<std::size_t>(e.from)].position[0],
                         forest.vertices[static_cast<std::size_t>(e.from)].position[1]};
            j["to"] = {e.to_position[0], e.to_position[1]};
            lines.push_back(j.dump());
          }
          write_lines(out_dir + "/dual_d2_seed" + std::to_string(f.seed) + ".ndjson", lines);
        }
      } catch (const MarginExhausted&) {
        failed[static_cast<std::size_t>(sdx)] = 1;
      }
    });
    std::int64_t total_verts = 0, total_cross = 0;
    for (std::int64_t sdx = 0; sdx < seeds; ++sdx) {
      const auto kdx = static_cast<std::size_t>(sdx);
      total_verts += verts[kdx];
      total_cross += cross[kdx];
      bad_degree += degree[kdx];
      bad_descent += descent[kdx];
      margin_failures += failed[kdx];
    }
    crossings += total_cross;
    windows.rows.push_back({w, static_cast<double>(seeds), static_cast<double>(total_verts),
                            static_cast<double>(total_cross)});
  }
  r.tables.push_back(windows);

  // bi-infinite probe over growing heights
  Table probe{"probe", {"height", "trials", "multi_component_fraction"}, {}};
  std::vector<double> fractions;
  for (std::size_t hi = 0; hi < probe_heights.size(); ++hi) {
    const double h = static_cast<double>(probe_heights[hi]);
    std::vector<char> multi(static_cast<std::size_t>(probe_seeds), 0);
    parallel_trials(probe_seeds, workers, [&](std::int64_t sdx) {
      FieldConfig f = trial_field(base, kStreamDual + 9000, sdx);  // shared across heights
      Box window;
      window.lo = make_vec(-static_cast<double>(probe_width) / 2, 0);
      window.hi = make_vec(static_cast<double>(probe_width) / 2, h);
      try {
        DualForest forest = build_dual(f, window, margin_for(h));
        BiInfiniteProbe p = probe_bi_infinite(f, forest);
        multi[static_cast<std::size_t>(sdx)] = p.traversing_components >= 2 ? 1 : 0;
      } catch (const MarginExhausted&) {
        multi[static_cast<std::size_t>(sdx)] = 1;  // counted against us, and noted
      }
    });
    std::int64_t m = 0;
    for (auto c : multi) m += c;
    fractions.push_back(static_cast<double>(m) / probe_seeds);
    probe.rows.push_back({h, static_cast<double>(probe_seeds), fractions.back()});
  }
  r.tables.push_back(probe);

  r.verdicts.push_back(make_verdict("out_degree_one", bad_degree == 0,
                                    static_cast<double>(bad_degree), 0));
  r.verdicts.push_back(make_verdict("edges_strictly_descending", bad_descent == 0,
                                    static_cast<double>(bad_descent), 0));
  r.verdicts.push_back(
      make_verdict("primal_dual_crossings", crossings == 0, static_cast<double>(crossings), 0));
  bool monotone = true;
  for (std::size_t i = 1; i < fractions.size(); ++i)
    monotone = monotone && fractions[i] <= fractions[i - 1];
  r.verdicts.push_back(make_verdict("probe_fraction_non_increasing", monotone, fractions.back(),
                                    fractions.front()));
  if (margin_failures > 0)
    r.notes.push_back("margin-exhausted windows: " + std::to_string(margin_failures));
  return r;
}

// ---------------------------------------------------------------------------
// eta

ExperimentReport run_eta(const RunConfig& cfg) {
  FieldConfig base = field_from(cfg);
  if (base.dimension != 2) throw std::invalid_argument("eta requires d=2");
  ExplorationParams params = explore_from(cfg, base.dimension, true);
  const int n_scale = static_cast<int>(cfg.get_int("eta.n", 50));
  const auto trials = cfg.get_int("eta.trials", 50);
  const auto eps_ladder = cfg.get_doubles("eta.eps", {0.4, 0.2, 0.1, 0.05});
  const double t_rel = cfg.get_double("eta.t", 0.25);
  const auto est_trials = cfg.get_int("eta.est_trials", 60);
  const auto est_budget = cfg.get_int("eta.est_budget", 2000000);
  const int workers = static_cast<int>(cfg.get_int("workers", 1));

  ExperimentReport r;
  r.experiment = "eta";
  echo_field(r, base);
  echo_explore(r, params);
  r.config_echo.emplace_back("eta.n", std::to_string(n_scale));
  r.config_echo.emplace_back("eta.trials", std::to_string(trials));
  r.config_echo.emplace_back("eta.eps", join_doubles(eps_ladder));
  r.config_echo.emplace_back("eta.t", format_double(t_rel));
  r.config_echo.emplace_back("eta.est_trials", std::to_string(est_trials));
  r.config_echo.emplace_back("eta.est_budget", std::to_string(est_budget));

  FieldConfig est_base = base;
  est_base.seed = derive_seed(base.seed, kStreamEta);
  GammaSigmaEstimate est =
      estimate_gamma_sigma(est_base, static_cast<int>(est_trials), est_budget, params);
  r.tables.push_back({"gamma_sigma",
                      {"gamma_hat", "sigma_hat", "trials_used", "shortfalls"},
                      {{est.gamma_hat, est.sigma_hat, static_cast<double>(est.trials_used),
                        static_cast<double>(est.shortfalls)}}});
  if (est.trials_used < 2 || est.gamma_hat <= 0 || est.sigma_hat <= 0) {
    r.verdicts.push_back(make_verdict("normalizers_estimated", false,
                                      static_cast<double>(est.trials_used), 2,
                                      "renewal shortfall: no usable gamma/sigma"));
    return r;
  }

  const double eps_max = *std::max_element(eps_ladder.begin(), eps_ladder.end());
  const double hw = 0.5 * eps_max * n_scale * est.sigma_hat;  // unscaled half-width at t0 = 0
  const double end_height = n_scale * static_cast<double>(n_scale) * est.gamma_hat * t_rel;
  const double rmax = max_step_length(2, base.half_width);
  const double pad = rmax + base.half_width + 1.0;

  // per trial, for each epsilon: eta value
  std::vector<std::vector<int>> eta(eps_ladder.size(),
                                    std::vector<int>(static_cast<std::size_t>(trials), 0));
  parallel_trials(trials, workers, [&](std::int64_t tr) {
    FieldConfig f = trial_field(base, kStreamEta + 1, tr);

    // phase 1: sources below height 0 that can cross [(-hw-pad), (hw+pad)] at 0
    struct Source {
      double v0 = 0.0;
      SitePoint first_above;
      int group = -1;
    };
    std::vector<Source> sources;
    const auto col_lo = static_cast<std::int64_t>(std::floor(-hw - pad));
    const auto col_hi = static_cast<std::int64_t>(std::ceil(hw + pad));
    const auto lev_lo = static_cast<std::int64_t>(std::floor(-(rmax + base.half_width))) - 1;
    for (std::int64_t col = col_lo; col <= col_hi; ++col) {
      for (std::int64_t lev = lev_lo; lev <= 0; ++lev) {
        SitePoint p = site_point(f, make_site(col, lev));
        if (p.position[1] >= 0.0) continue;  // born after t0
        Vec prev = p.position;
        SitePoint cur = p;
        while (cur.position[1] < 0.0) {
          prev = cur.position;
          cur = h_step(f, cur.position);
        }
        const double w = (0.0 - prev[1]) / (cur.position[1] - prev[1]);
        const double v0 = prev[0] + w * (cur.position[0] - prev[0]);
        if (v0 < -hw || v0 > hw) continue;
        sources.push_back({v0, cur, -1});
      }
    }

    // phase 2: walk survivors upward with vertex-identity merging (union-find)
    std::vector<int> parent(sources.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
      while (parent[a] != a) {
        parent[a] = parent[parent[a]];
        a = parent[a];
      }
      return a;
    };
    // visited vertex -> (group, height); entries strictly below every active
    // cursor can never be landed on again and are pruned
    std::unordered_map<LatticeSite, std::pair<int, double>, LatticeSiteHash> visited;
    struct Cursor {
      SitePoint at;
      int id;
      bool done = false;
    };
    std::vector<Cursor> cursors;
    for (std::size_t si = 0; si < sources.size(); ++si) {
      auto [it, fresh] = visited.try_emplace(
          sources[si].first_above.site,
          std::make_pair(static_cast<int>(si), sources[si].first_above.position[1]));
      if (!fresh) {
        parent[si] = find(it->second.first);
        continue;
      }
      cursors.push_back({sources[si].first_above, static_cast<int>(si), false});
    }
    // lockstep via a min-heap on heights; once a single group holds every
    // source the counts are decided
    int groups = static_cast<int>(cursors.size());
    using HeapItem = std::pair<double, int>;
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;
    for (std::size_t ci = 0; ci < cursors.size(); ++ci)
      heap.push({cursors[ci].at.position[1], static_cast<int>(ci)});
    while (groups > 1 && !heap.empty()) {
      const auto [h, ci] = heap.top();
      heap.pop();
      Cursor& c = cursors[static_cast<std::size_t>(ci)];
      while (!c.done) {
        if (c.at.position[1] >= end_height) {
          c.done = true;
          break;
        }
        SitePoint nxt = h_step(f, c.at.position);
        c.at = nxt;
        auto [it, fresh] =
            visited.try_emplace(nxt.site, std::make_pair(c.id, nxt.position[1]));
        if (!fresh) {
          const int ra = find(c.id), rb = find(it->second.first);
          if (ra != rb) {
            parent[ra] = rb;
            --groups;
          }
          c.done = true;  // its future equals the already-walked path
          break;
        }
        if (c.at.position[1] > h + 8.0) {
          heap.push({c.at.position[1], ci});
          break;
        }
      }
      if (visited.size() > 100000 && !heap.empty()) {
        const double floor_h = heap.top().first - 0.5;
        std::erase_if(visited, [&](const auto& kv) { return kv.second.second < floor_h; });
      }
    }

    for (std::size_t ei = 0; ei < eps_ladder.size(); ++ei) {
      const double half = 0.5 * eps_ladder[ei] * n_scale * est.sigma_hat;
      std::vector<int> roots;
      for (std::size_t si = 0; si < sources.size(); ++si) {
        if (sources[si].v0 < -half || sources[si].v0 > half) continue;
        const int root = find(static_cast<int>(si));
        if (std::find(roots.begin(), roots.end(), root) == roots.end()) roots.push_back(root);
      }
      eta[ei][static_cast<std::size_t>(tr)] = static_cast<int>(roots.size());
    }
  });

  Table t{"eta", {"epsilon", "t", "trials", "p_eta_ge_2", "p_eta_ge_3_over_eps"}, {}};
  std::vector<double> p2s, p3e;
  for (std::size_t ei = 0; ei < eps_ladder.size(); ++ei) {
    std::int64_t ge2 = 0, ge3 = 0;
    for (std::int64_t tr = 0; tr < trials; ++tr) {
      if (eta[ei][static_cast<std::size_t>(tr)] >= 2) ++ge2;
      if (eta[ei][static_cast<std::size_t>(tr)] >= 3) ++ge3;
    }
    const double p2 = static_cast<double>(ge2) / trials;
    const double p3 = static_cast<double>(ge3) / trials / eps_ladder[ei];
    p2s.push_back(p2);
    p3e.push_back(p3);
    t.rows.push_back({eps_ladder[ei], t_rel, static_cast<double>(trials), p2, p3});
  }
  r.tables.push_back(t);

  // ladder is ordered decreasing in epsilon; both statistics must not increase
  bool b1 = true, b2 = true;
  for (std::size_t i = 1; i < eps_ladder.size(); ++i) {
    b1 = b1 && p2s[i] <= p2s[i - 1];
    b2 = b2 && p3e[i] <= p3e[i - 1];
  }
  r.verdicts.push_back(make_verdict("b1_trend", b1, p2s.back(), p2s.front(),
                                    "P(eta>=2) non-increasing as epsilon decreases"));
  r.verdicts.push_back(make_verdict("b2_trend", b2, p3e.back(), p3e.front(),
                                    "P(eta>=3)/eps non-increasing as epsilon decreases"));
  return r;
}

// ---------------------------------------------------------------------------
// dump-paths

ExperimentReport run_dump_paths(const RunConfig& cfg, const std::string& out_dir) {
  FieldConfig field = field_from(cfg);
  const auto count = cfg.get_int("dump.count", 5);
  const auto steps = cfg.get_int("dump.steps", 200);
  const auto spacing = cfg.get_int("dump.spacing", 4);

  ExperimentReport r;
  r.experiment = "dump-paths";
  echo_field(r, field);
  r.config_echo.emplace_back("dump.count", std::to_string(count));
  r.config_echo.emplace_back("dump.steps", std::to_string(steps));
  r.config_echo.emplace_back("dump.spacing", std::to_string(spacing));

  std::vector<std::string> lines;
  StopRule stop;
  stop.steps = steps;
  for (std::int64_t i = 0; i < count; ++i) {
    Vec start{};
    start[0] = static_cast<double>(i * spacing);
    DsfPath p = trace_path(field, start, stop);
    for (std::size_t k = 0; k < p.vertices.size(); ++k) {
      nlohmann::ordered_json j;
      j["path"] = i;
      j["k"] = k + 1;
      const auto pj = site_point_json(p.vertices[k], field.dimension);
      j["site"] = pj["site"];
      j["offset"] = pj["offset"];
      j["position"] = pj["position"];
      lines.push_back(j.dump());
    }
  }
  r.tables.push_back({"counts",
                      {"paths", "vertices"},
                      {{static_cast<double>(count), static_cast<double>(lines.size())}}});
  if (!out_dir.empty()) {
    const std::string path = out_dir + "/paths_d" + std::to_string(field.dimension) + "_seed" +
                             std::to_string(field.seed) + ".ndjson";
    write_lines(path, lines);
    r.notes.push_back("path dump: " + path);
  }
  return r;
}

// ---------------------------------------------------------------------------

ExperimentReport run_experiment(const RunConfig& cfg, const std::string& out_dir) {
  const std::string name = cfg.get_string("experiment", "");
  if (name == "forest") return run_forest(cfg, out_dir);
  if (name == "coalesce") return run_coalesce(cfg);
  if (name == "renewals") return run_renewals(cfg);
  if (name == "increments") return run_increments(cfg);
  if (name == "donsker") return run_donsker(cfg);
  if (name == "treeness") return run_treeness(cfg);
  if (name == "foster") return run_foster(cfg);
  if (name == "coupling") return run_coupling(cfg);
  if (name == "dual") return run_dual(cfg, out_dir);
  if (name == "eta") return run_eta(cfg);
  if (name == "dump-paths") return run_dump_paths(cfg, out_dir);
  throw std::invalid_argument("unknown experiment: '" + name + "'");
}

}  // namespace pdsf
