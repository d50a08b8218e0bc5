#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "pdsf/field.hpp"
#include "pdsf/numeric.hpp"

using namespace pdsf;

TEST_CASE("perturbation is a pure function of (seed, site)") {
  FieldConfig cfg = FieldConfig::make(2, 7);
  const Vec a = perturbation(cfg, make_site(0, 0));
  const Vec b = perturbation(cfg, make_site(0, 0));
  CHECK(a == b);
  // distinct sites de-correlate, distinct seeds decorrelate
  CHECK(perturbation(cfg, make_site(1, 0)) != a);
  FieldConfig cfg2 = FieldConfig::make(2, 8);
  CHECK(perturbation(cfg2, make_site(0, 0)) != a);
}

TEST_CASE("offsets stay in [-rho, rho]^d") {
  FieldConfig cfg = FieldConfig::make(3, 1234);
  for (int i = -20; i <= 20; ++i) {
    const Vec off = perturbation(cfg, make_site(i, 2 * i, -i));
    for (int k = 0; k < 3; ++k) {
      CHECK(off[k] >= -1.0);
      CHECK(off[k] <= 1.0);
    }
  }
  FieldConfig small = FieldConfig::make(2, 5, 0.25);
  for (int i = 0; i < 50; ++i) {
    const Vec off = perturbation(small, make_site(i, 3));
    CHECK(std::abs(off[0]) <= 0.25);
    CHECK(std::abs(off[1]) <= 0.25);
  }
}

TEST_CASE("offset mean over 1e6 distinct sites matches the uniform law") {
  FieldConfig cfg = FieldConfig::make(2, 7);
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t a = 0; a < 1000; ++a)
    for (std::int64_t b = 0; b < 1000; ++b) {
      sum += perturbation(cfg, make_site(a, b))[0];
      ++n;
    }
  const double tol = 3.0 * (2.0 / std::sqrt(12.0)) / 1000.0;
  CHECK(std::abs(sum / static_cast<double>(n)) < tol);
}

TEST_CASE("per-coordinate marginals pass KS against Uniform[-rho, rho]") {
  FieldConfig cfg = FieldConfig::make(2, 99);
  const int n = 100000;
  std::vector<double> xs;
  xs.reserve(n);
  for (int i = 0; i < n; ++i) xs.push_back(perturbation(cfg, make_site(i, -i - 1))[1]);
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n; ++i) {
    const double f = (xs[i] + 1.0) / 2.0;  // Uniform[-1,1] CDF
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  CHECK(d * std::sqrt(static_cast<double>(n)) < 1.628);  // 1% critical value
}

TEST_CASE("offsets at distinct sites are empirically uncorrelated") {
  FieldConfig cfg = FieldConfig::make(2, 424242);
  const int n = 100000;
  std::vector<double> a, b, c;
  for (int i = 0; i < n; ++i) {
    a.push_back(perturbation(cfg, make_site(i, 0))[0]);
    b.push_back(perturbation(cfg, make_site(i + 1, 0))[0]);
    c.push_back(perturbation(cfg, make_site(i, 1))[1]);
  }
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(pdsf::num::pearson(a, b)) < bound);
  CHECK(std::abs(pdsf::num::pearson(a, c)) < bound);
}

namespace {

// Exhaustive-scan oracle, independent of the production enumeration.
std::vector<SitePoint> brute_points_in_box(const FieldConfig& cfg, const Box& box,
                                           std::int64_t scan) {
  std::vector<SitePoint> out;
  for (std::int64_t a = -scan; a <= scan; ++a)
    for (std::int64_t b = -scan; b <= scan; ++b) {
      SitePoint p = site_point(cfg, make_site(a, b));
      bool in = true;
      for (int i = 0; i < 2; ++i)
        in = in && p.position[i] >= box.lo[i] && p.position[i] <= box.hi[i];
      if (in) out.push_back(p);
    }
  return out;
}

}  // namespace

TEST_CASE("points_in_box equals the exhaustive-scan oracle") {
  FieldConfig cfg = FieldConfig::make(2, 7);
  Box box;
  box.lo = make_vec(-10, -10);
  box.hi = make_vec(10, 10);
  auto got = points_in_box(cfg, box);
  auto want = brute_points_in_box(cfg, box, 11);
  REQUIRE(got.size() == want.size());
  std::set<std::pair<std::int64_t, std::int64_t>> gs, ws;
  for (const auto& p : got) gs.insert({p.site.c[0], p.site.c[1]});
  for (const auto& p : want) ws.insert({p.site.c[0], p.site.c[1]});
  CHECK(gs == ws);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-15.0, 15.0);
  for (int rep = 0; rep < 20; ++rep) {
    Box rb;
    for (int i = 0; i < 2; ++i) {
      double a = u(rng), b = u(rng);
      rb.lo[i] = std::min(a, b);
      rb.hi[i] = std::max(a, b);
    }
    CHECK(points_in_box(cfg, rb).size() == brute_points_in_box(cfg, rb, 18).size());
  }
}

TEST_CASE("overrides pin sites and leave the rest of the field alone") {
  FieldConfig base = FieldConfig::make(2, 7);
  FieldConfig cfg = with_overrides(base, {{make_site(0, 0), make_vec(0.5, 0.5)}});

  Box box;
  box.lo = make_vec(0.4, 0.4);
  box.hi = make_vec(0.6, 0.6);
  auto pts = points_in_box(cfg, box);
  bool found = false;
  for (const auto& p : pts)
    if (p.site == make_site(0, 0) && p.position[0] == 0.5 && p.position[1] == 0.5) found = true;
  CHECK(found);

  CHECK(perturbation(cfg, make_site(5, 5)) == perturbation(base, make_site(5, 5)));
  FieldConfig same = with_overrides(base, {});
  CHECK(perturbation(same, make_site(3, -2)) == perturbation(base, make_site(3, -2)));

  CHECK_THROWS_AS(with_overrides(base, {{make_site(0, 0), make_vec(1.5, 0.0)}}),
                  std::invalid_argument);
}

TEST_CASE("coupled field routes sites by transverse distance") {
  FieldConfig a = FieldConfig::make(3, 1);
  FieldConfig b = FieldConfig::make(3, 2);
  FieldConfig c = FieldConfig::make(3, 3);
  const LatticeSite u = make_site(0, 0, 0);
  const LatticeSite v = make_site(40, 0, 0);
  FieldConfig mix = coupled_field(a, b, c, u, v, 10.0);

  CHECK(perturbation(mix, make_site(2, 3, 7)) == perturbation(a, make_site(2, 3, 7)));
  CHECK(perturbation(mix, make_site(38, -1, 0)) == perturbation(b, make_site(38, -1, 0)));
  CHECK(perturbation(mix, make_site(20, 0, 5)) == perturbation(c, make_site(20, 0, 5)));

  CHECK_THROWS_AS(coupled_field(a, b, c, u, v, 15.0), std::invalid_argument);
}

TEST_CASE("config construction validates its arguments") {
  CHECK_THROWS_AS(FieldConfig::make(4, 0), std::invalid_argument);
  CHECK_THROWS_AS(FieldConfig::make(2, 0, -1.0), std::invalid_argument);
}
