#include "pdsf/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pdsf/numeric.hpp"

namespace pdsf {

double ScaledPath::value(double t) const {
  if (knots.empty()) throw std::invalid_argument("empty path");
  if (t <= knots.front()[0]) return knots.front()[1];
  if (t >= knots.back()[0]) return knots.back()[1];
  auto it = std::lower_bound(knots.begin(), knots.end(), t,
                             [](const auto& k, double v) { return k[0] < v; });
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  if (hi[0] == lo[0]) return hi[1];
  const double w = (t - lo[0]) / (hi[0] - lo[0]);
  return lo[1] + w * (hi[1] - lo[1]);
}

ScaledPath scale_path(const DsfPath& path, int n, double gamma, double sigma) {
  if (n < 1 || gamma <= 0.0 || sigma <= 0.0) throw std::invalid_argument("bad scale parameters");
  ScaledPath sp;
  sp.forward = true;
  sp.n = n;
  sp.gamma = gamma;
  sp.sigma = sigma;
  const double ts = 1.0 / (n * n * gamma);
  const double vs = 1.0 / (n * sigma);
  const int d = path.dim;
  sp.knots.push_back({path.start[d - 1] * ts, path.start[0] * vs});
  for (const SitePoint& v : path.vertices)
    sp.knots.push_back({v.position[d - 1] * ts, v.position[0] * vs});
  return sp;
}

ScaledPath scale_dual_path(const DualPath& path, int n, double gamma, double sigma) {
  if (n < 1 || gamma <= 0.0 || sigma <= 0.0) throw std::invalid_argument("bad scale parameters");
  ScaledPath sp;
  sp.forward = false;
  sp.n = n;
  sp.gamma = gamma;
  sp.sigma = sigma;
  const double ts = 1.0 / (n * n * gamma);
  const double vs = 1.0 / (n * sigma);
  for (auto it = path.knots.rbegin(); it != path.knots.rend(); ++it)
    sp.knots.push_back({(*it)[1] * ts, (*it)[0] * vs});
  return sp;
}

namespace {

// g(t) = tanh(p(t v sigma_p)) / (1 + |t|) for a forward path.
struct MetricCurve {
  const ScaledPath* p;
  double sigma;
  bool reflect;  // backward paths evaluate at -t

  double clamped(double t) const {
    return reflect ? p->value(std::min(-t, sigma)) : p->value(std::max(t, sigma));
  }
  double eval(double t) const { return std::tanh(clamped(t)) / (1.0 + std::abs(t)); }
  // Lipschitz bound for g on [a, b]: |d/dt tanh(p)w| <= |p'| w + |w'| <= |p'| + 1.
  double lipschitz(double a, double b) const {
    double max_slope = 0.0;
    for (std::size_t i = 1; i < p->knots.size(); ++i) {
      const double t0 = p->knots[i - 1][0], t1 = p->knots[i][0];
      const double s0 = reflect ? -t1 : t0, s1 = reflect ? -t0 : t1;
      if (s1 < a || s0 > b || t1 == t0) continue;
      max_slope = std::max(max_slope, std::abs((p->knots[i][1] - p->knots[i - 1][1]) /
                                               (p->knots[i][0] - p->knots[i - 1][0])));
    }
    return max_slope + 1.0;
  }
};

constexpr double kSupTolerance = 1e-6;

double certified_sup(const MetricCurve& f, const MetricCurve& g, double lo, double hi) {
  double best = 0.0;
  struct Seg {
    double a, b, fa, fb;
  };
  auto diff = [&](double t) { return std::abs(f.eval(t) - g.eval(t)); };
  std::vector<Seg> stack{{lo, hi, diff(lo), diff(hi)}};
  while (!stack.empty()) {
    Seg s = stack.back();
    stack.pop_back();
    best = std::max(best, std::max(s.fa, s.fb));
    const double lip = f.lipschitz(s.a, s.b) + g.lipschitz(s.a, s.b);
    const double bound = std::max(s.fa, s.fb) + lip * (s.b - s.a) / 2.0;
    if (bound <= best + kSupTolerance) continue;
    const double m = 0.5 * (s.a + s.b);
    const double fm = diff(m);
    stack.push_back({s.a, m, s.fa, fm});
    stack.push_back({m, s.b, fm, s.fb});
  }
  return best;
}

}  // namespace

double d_pi(const ScaledPath& p1, const ScaledPath& p2) {
  if (p1.forward != p2.forward) throw std::invalid_argument("paths of opposite directions");
  const bool reflect = !p1.forward;
  const double s1 = reflect ? -p1.start_time() : p1.start_time();
  const double s2 = reflect ? -p2.start_time() : p2.start_time();
  MetricCurve f{&p1, p1.start_time(), reflect};
  MetricCurve g{&p2, p2.start_time(), reflect};

  const double lo = std::min(s1, s2);
  // Beyond both terminal knots the curves decay like 1/(1+|t|); integrate the
  // kinks (knots, starting times, 0) and one decade past, then rely on decay.
  double hi = std::max({std::abs(lo), 1.0});
  auto last_knot = [&](const ScaledPath& p) {
    return reflect ? -p.knots.front()[0] : p.knots.back()[0];
  };
  hi = std::max({hi, last_knot(p1), last_knot(p2), 0.0}) + 1.0;
  // decay tail: sup_{t >= hi} |f - g| <= 2 / (1 + hi) unioned via expanding hi
  double sup = certified_sup(f, g, lo, hi);
  while (2.0 / (1.0 + hi) > sup + kSupTolerance) {
    const double next = hi * 2.0 + 1.0;
    sup = std::max(sup, certified_sup(f, g, hi, next));
    hi = next;
  }
  return std::max(std::abs(std::tanh(s1) - std::tanh(s2)), sup);
}

double d_hausdorff(const PathFamily& k1, const PathFamily& k2) {
  if (k1.paths.empty() || k2.paths.empty()) throw std::invalid_argument("empty path family");
  double h = 0.0;
  auto one_sided = [](const PathFamily& a, const PathFamily& b) {
    double sup = 0.0;
    for (const ScaledPath& pa : a.paths) {
      double inf = 1e300;
      for (const ScaledPath& pb : b.paths) inf = std::min(inf, d_pi(pa, pb));
      sup = std::max(sup, inf);
    }
    return sup;
  };
  h = std::max(one_sided(k1, k2), one_sided(k2, k1));
  return h;
}

int eta_count(const PathFamily& family, double t0, double t, double a, double b) {
  if (!(t > 0.0) || !(a < b)) throw std::invalid_argument("eta requires t > 0 and a < b");
  std::vector<double> positions;
  for (const ScaledPath& p : family.paths) {
    if (p.start_time() > t0) continue;
    const double v0 = p.value(t0);
    if (v0 < a || v0 > b) continue;
    positions.push_back(p.value(t0 + t));
  }
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
  return static_cast<int>(positions.size());
}

GammaSigmaEstimate estimate_gamma_sigma(const FieldConfig& base, int trials,
                                        std::int64_t step_budget,
                                        const ExplorationParams& params) {
  if (trials < 30) throw std::invalid_argument("need at least 30 trials");
  GammaSigmaEstimate est;
  std::vector<double> y2, rise;
  for (int trial = 0; trial < trials; ++trial) {
    FieldConfig cfg = base;
    cfg.seed = derive_seed(base.seed, 0x67736574ULL + static_cast<std::uint64_t>(trial));
    ExplorationState s = make_single(cfg, make_site(0, 0, 0), params);
    while (s.renewals.size() < 2 && s.step_index < step_budget) joint_step(s, cfg);
    if (s.renewals.size() < 2) {
      ++est.shortfalls;
      continue;
    }
    const int d = cfg.dimension;
    y2.push_back(static_cast<double>(s.renewals[1].hat[0].c[0] - s.renewals[0].hat[0].c[0]));
    rise.push_back(
        static_cast<double>(s.renewals[1].hat[0].c[d - 1] - s.renewals[0].hat[0].c[d - 1]));
  }
  est.trials_used = static_cast<int>(y2.size());
  if (est.trials_used >= 2) {
    est.gamma_hat = num::mean(rise);
    const double var = num::variance(y2);
    est.sigma_hat = std::sqrt(var);
    est.gamma_ci_half = 1.96 * num::std_error_of_mean(rise);
    est.sigma2_ci_half = 1.96 * var * std::sqrt(2.0 / (est.trials_used - 1));
  }
  return est;
}

}  // namespace pdsf
