#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

// Perturbed lattice point process: V = { w + U_w : w in Z^d }, with U_w i.i.d.
// uniform on [-rho, +rho]^d, realized lazily through a counter-based keyed hash
// so that any site can be queried in O(1) with exact reproducibility.

namespace pdsf {

inline constexpr int kMaxDim = 3;

struct LatticeSite {
  std::array<std::int64_t, kMaxDim> c{};  // coords beyond the field dimension stay 0

  friend bool operator==(const LatticeSite&, const LatticeSite&) = default;
};

struct LatticeSiteHash {
  std::size_t operator()(const LatticeSite& s) const noexcept;
};

using Vec = std::array<double, kMaxDim>;

inline LatticeSite make_site(std::int64_t a, std::int64_t b, std::int64_t c = 0) {
  return LatticeSite{{a, b, c}};
}
inline Vec make_vec(double a, double b, double c = 0.0) { return Vec{{a, b, c}}; }

double l1_dist(const Vec& a, const Vec& b, int dim);
// L1 distance of the first dim-1 coordinates only.
double transverse_l1_dist(const Vec& a, const Vec& b, int dim);
bool lex_less(const Vec& a, const Vec& b, int dim);

// Closed axis-aligned box; coordinates beyond the field dimension are ignored.
struct Box {
  Vec lo{};
  Vec hi{};
};

// A realized field point together with the lattice site it came from. Carrying
// the site makes the hat map exact, even in synthetic degenerate configurations.
struct SitePoint {
  LatticeSite site;
  Vec offset{};
  Vec position{};

  // One point per site, so site identity is point identity.
  friend bool operator==(const SitePoint& a, const SitePoint& b) { return a.site == b.site; }
};

struct FieldConfig;

// Composite field for the coupled construction: sites within transverse L1
// distance r of u use field a, within r of v use field b, all others field c.
struct FieldCoupling {
  std::shared_ptr<const FieldConfig> a, b, c;
  LatticeSite u, v;
  double radius = 0.0;
};

struct FieldConfig {
  int dimension = 2;            // 2 or 3
  std::uint64_t seed = 0;
  double half_width = 1.0;      // rho
  std::unordered_map<LatticeSite, Vec, LatticeSiteHash> overrides;
  std::shared_ptr<const FieldCoupling> coupling;  // null for plain fields

  static FieldConfig make(int dimension, std::uint64_t seed, double half_width = 1.0);
};

// Pure function of (config, site); override-aware.
Vec perturbation(const FieldConfig& cfg, const LatticeSite& w);
SitePoint site_point(const FieldConfig& cfg, const LatticeSite& w);

// All SitePoints whose position lies in the closed box. Enumerates the sites in
// the rho-inflation of the box, so the result is exhaustive.
std::vector<SitePoint> points_in_box(const FieldConfig& cfg, const Box& box);

// New config returning fixed offsets at the listed sites. Throws std::invalid_argument
// if an offset leaves [-rho, rho]^d.
FieldConfig with_overrides(const FieldConfig& cfg,
                           const std::vector<std::pair<LatticeSite, Vec>>& assignments);

// Composite field per the coupling rule. Requires r < |u_bar - v_bar|_1 / 3.
FieldConfig coupled_field(const FieldConfig& a, const FieldConfig& b, const FieldConfig& c,
                          const LatticeSite& u, const LatticeSite& v, double r);

// Deterministic 64-bit mixer used for seed derivation everywhere (sub-streams,
// per-trial seeds). Exposed so experiments derive trial seeds the same way.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pdsf
