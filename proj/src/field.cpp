#include "pdsf/field.hpp"

#include <cmath>
#include <stdexcept>

namespace pdsf {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed ^ 0xd1b54a32d192ed03ULL) ^ stream);
}

std::size_t LatticeSiteHash::operator()(const LatticeSite& s) const noexcept {
  std::uint64_t h = 0x2545f4914f6cdd1dULL;
  for (int i = 0; i < kMaxDim; ++i) h = mix64(h ^ static_cast<std::uint64_t>(s.c[i]));
  return static_cast<std::size_t>(h);
}

double l1_dist(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double transverse_l1_dist(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int i = 0; i + 1 < dim; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

bool lex_less(const Vec& a, const Vec& b, int dim) {
  for (int i = 0; i < dim; ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

FieldConfig FieldConfig::make(int dimension, std::uint64_t seed, double half_width) {
  if (dimension != 2 && dimension != 3) throw std::invalid_argument("dimension must be 2 or 3");
  if (!(half_width > 0.0)) throw std::invalid_argument("half_width must be > 0");
  FieldConfig cfg;
  cfg.dimension = dimension;
  cfg.seed = seed;
  cfg.half_width = half_width;
  return cfg;
}

namespace {

double uniform01(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

Vec hashed_offset(const FieldConfig& cfg, const LatticeSite& w) {
  std::uint64_t h = mix64(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  for (int i = 0; i < kMaxDim; ++i) h = mix64(h ^ static_cast<std::uint64_t>(w.c[i]));
  Vec off{};
  for (int i = 0; i < cfg.dimension; ++i) {
    const double u = uniform01(mix64(h ^ static_cast<std::uint64_t>(i + 1)));
    off[i] = cfg.half_width * (2.0 * u - 1.0);
  }
  return off;
}

double coupling_transverse_dist(const LatticeSite& a, const LatticeSite& w, int dim) {
  double s = 0.0;
  for (int i = 0; i + 1 < dim; ++i)
    s += std::abs(static_cast<double>(a.c[i]) - static_cast<double>(w.c[i]));
  return s;
}

}  // namespace

Vec perturbation(const FieldConfig& cfg, const LatticeSite& w) {
  if (cfg.coupling) {
    const FieldCoupling& cp = *cfg.coupling;
    if (coupling_transverse_dist(cp.u, w, cfg.dimension) < cp.radius) return perturbation(*cp.a, w);
    if (coupling_transverse_dist(cp.v, w, cfg.dimension) < cp.radius) return perturbation(*cp.b, w);
    return perturbation(*cp.c, w);
  }
  if (auto it = cfg.overrides.find(w); it != cfg.overrides.end()) return it->second;
  return hashed_offset(cfg, w);
}

SitePoint site_point(const FieldConfig& cfg, const LatticeSite& w) {
  SitePoint p;
  p.site = w;
  p.offset = perturbation(cfg, w);
  for (int i = 0; i < cfg.dimension; ++i)
    p.position[i] = static_cast<double>(w.c[i]) + p.offset[i];
  return p;
}

std::vector<SitePoint> points_in_box(const FieldConfig& cfg, const Box& box) {
  const int d = cfg.dimension;
  const double rho = cfg.half_width;
  std::array<std::int64_t, kMaxDim> lo{}, hi{};
  for (int i = 0; i < d; ++i) {
    lo[i] = static_cast<std::int64_t>(std::ceil(box.lo[i] - rho));
    hi[i] = static_cast<std::int64_t>(std::floor(box.hi[i] + rho));
    if (lo[i] > hi[i]) return {};
  }
  std::vector<SitePoint> out;
  LatticeSite w{};
  auto inside = [&](const Vec& pos) {
    for (int i = 0; i < d; ++i)
      if (pos[i] < box.lo[i] || pos[i] > box.hi[i]) return false;
    return true;
  };
  for (std::int64_t a = lo[0]; a <= hi[0]; ++a) {
    w.c[0] = a;
    for (std::int64_t b = lo[1]; b <= hi[1]; ++b) {
      w.c[1] = b;
      if (d == 2) {
        SitePoint p = site_point(cfg, w);
        if (inside(p.position)) out.push_back(p);
      } else {
        for (std::int64_t c = lo[2]; c <= hi[2]; ++c) {
          w.c[2] = c;
          SitePoint p = site_point(cfg, w);
          if (inside(p.position)) out.push_back(p);
        }
        w.c[2] = 0;
      }
    }
  }
  return out;
}

FieldConfig with_overrides(const FieldConfig& cfg,
                           const std::vector<std::pair<LatticeSite, Vec>>& assignments) {
  if (cfg.coupling) throw std::invalid_argument("cannot override a coupled field");
  FieldConfig out = cfg;
  for (const auto& [site, off] : assignments) {
    for (int i = 0; i < cfg.dimension; ++i)
      if (std::abs(off[i]) > cfg.half_width)
        throw std::invalid_argument("override offset outside [-rho, rho]^d");
    out.overrides[site] = off;
  }
  return out;
}

FieldConfig coupled_field(const FieldConfig& a, const FieldConfig& b, const FieldConfig& c,
                          const LatticeSite& u, const LatticeSite& v, double r) {
  if (a.dimension != b.dimension || b.dimension != c.dimension)
    throw std::invalid_argument("coupled fields must share a dimension");
  if (a.half_width != b.half_width || b.half_width != c.half_width)
    throw std::invalid_argument("coupled fields must share half_width");
  const double dmin = coupling_transverse_dist(u, v, a.dimension);
  if (!(r < dmin / 3.0)) throw std::invalid_argument("coupling radius must be < |u-v|_1 / 3");
  FieldConfig out = c;
  auto cp = std::make_shared<FieldCoupling>();
  cp->a = std::make_shared<const FieldConfig>(a);
  cp->b = std::make_shared<const FieldConfig>(b);
  cp->c = std::make_shared<const FieldConfig>(c);
  cp->u = u;
  cp->v = v;
  cp->radius = r;
  out.coupling = cp;
  out.overrides.clear();
  return out;
}

}  // namespace pdsf
