#pragma once

// Synthetic CT phantoms with analytically known fluid volume, and a
// deterministic HU-band segmenter that stands in for a trained model.
//
// Geometry is in millimeters from the grid corner: voxel (i, j, k) has its
// center at ((i + 0.5)·dx, (j + 0.5)·dy, (k + 0.5)·dz). Membership is
// decided at voxel centers only (no partial-volume modelling).

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"
#include "ascvol/quantify.hpp"
#include "ascvol/random.hpp"
#include "json.hpp"

namespace ascvol {

inline constexpr double kAirHu = -1000.0;
inline constexpr double kSoftTissueHu = 50.0;
inline constexpr double kFluidHu = 10.0;

using Vec3 = std::array<double, 3>;

/// Axis-aligned ellipsoid.
struct Ellipsoid {
  Vec3 center{};
  Vec3 semi_axes{1.0, 1.0, 1.0};
  double hu = 0.0;

  /// Σ((p - c)/a)², ≤ 1 inside.
  double level(const Vec3& p) const noexcept {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double t = (p[a] - center[a]) / semi_axes[a];
      s += t * t;
    }
    return s;
  }
  bool contains(const Vec3& p) const noexcept { return level(p) <= 1.0; }
  double volume_mm3() const noexcept {
    return 4.0 / 3.0 * std::numbers::pi * semi_axes[0] * semi_axes[1] * semi_axes[2];
  }
};

struct PhantomSpec {
  Dims dims{64, 64, 64};
  VoxelSpacing spacing{};
  Ellipsoid body{};
  std::vector<Ellipsoid> pockets;
  double background_hu = kAirHu;
  double noise_sd = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

namespace detail {

/// Points on the ellipsoid surface on a latitude/longitude lattice.
inline std::vector<Vec3> surface_samples(const Ellipsoid& e, int n_lat = 24, int n_lon = 48) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= n_lat; ++i) {
    const double theta = std::numbers::pi * i / n_lat;
    for (int j = 0; j < n_lon; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / n_lon;
      pts.push_back({e.center[0] + e.semi_axes[0] * std::sin(theta) * std::cos(phi),
                     e.center[1] + e.semi_axes[1] * std::sin(theta) * std::sin(phi),
                     e.center[2] + e.semi_axes[2] * std::cos(theta)});
    }
  }
  return pts;
}

/// Surface points plus an interior lattice of the bounding box.
inline std::vector<Vec3> volume_samples(const Ellipsoid& e, int n = 16) {
  auto pts = surface_samples(e);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        const Vec3 p{e.center[0] + e.semi_axes[0] * (2.0 * (i + 0.5) / n - 1.0),
                     e.center[1] + e.semi_axes[1] * (2.0 * (j + 0.5) / n - 1.0),
                     e.center[2] + e.semi_axes[2] * (2.0 * (k + 0.5) / n - 1.0)};
        if (e.contains(p)) pts.push_back(p);
      }
    }
  }
  return pts;
}

inline bool may_overlap(const Ellipsoid& a, const Ellipsoid& b) {
  double dist2 = 0.0;
  for (int i = 0; i < 3; ++i) dist2 += (a.center[i] - b.center[i]) * (a.center[i] - b.center[i]);
  const double ra = std::max({a.semi_axes[0], a.semi_axes[1], a.semi_axes[2]});
  const double rb = std::max({b.semi_axes[0], b.semi_axes[1], b.semi_axes[2]});
  return std::sqrt(dist2) <= ra + rb;
}

inline void validate_ellipsoid(const Ellipsoid& e, const char* what) {
  for (int a = 0; a < 3; ++a) {
    require(std::isfinite(e.center[a]), Errc::InvalidParameter, std::string(what) + " center must be finite");
    require(std::isfinite(e.semi_axes[a]) && e.semi_axes[a] > 0.0, Errc::InvalidParameter,
            std::string(what) + " semi-axes must be positive");
  }
  require(std::isfinite(e.hu), Errc::InvalidParameter, std::string(what) + " HU must be finite");
}

}  // namespace detail

/// Containment and disjointness are checked by sampling (surface lattice
/// plus an interior lattice), not exactly.
inline void PhantomSpec::validate() const {
  require(dims.nx > 0 && dims.ny > 0 && dims.nz > 0, Errc::InvalidParameter, "phantom dims must be positive");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, Errc::InvalidParameter, "noise_sd must be nonnegative");
  detail::validate_ellipsoid(body, "body");
  require(background_hu < body.hu, Errc::InvalidParameter, "background HU must be below soft-tissue HU");
  for (const auto& p : pockets) {
    detail::validate_ellipsoid(p, "pocket");
    require(background_hu < p.hu && p.hu < body.hu, Errc::InvalidParameter,
            "pocket HU must lie between background and soft tissue");
    for (const auto& s : detail::surface_samples(p)) {
      require(body.contains(s), Errc::PocketOutsideBody, "fluid pocket extends outside the body ellipsoid");
    }
  }
  for (std::size_t a = 0; a < pockets.size(); ++a) {
    for (std::size_t b = a + 1; b < pockets.size(); ++b) {
      if (!detail::may_overlap(pockets[a], pockets[b])) continue;
      for (const auto& [x, y] : {std::pair{a, b}, std::pair{b, a}}) {
        for (const auto& s : detail::volume_samples(pockets[x])) {
          require(!pockets[y].contains(s), Errc::OverlappingPockets,
                  "fluid pockets " + std::to_string(a) + " and " + std::to_string(b) + " overlap");
        }
      }
    }
  }
}

struct PhantomTruth {
  BinaryMask truth_mask;
  double analytic_volume_ml = 0.0;
  double voxelized_volume_ml = 0.0;
};

struct Phantom {
  CtVolume ct;
  PhantomTruth truth;
  BinaryMask body_mask;
};

inline Vec3 voxel_center_mm(const VoxelSpacing& s, std::size_t i, std::size_t j, std::size_t k) noexcept {
  return {(static_cast<double>(i) + 0.5) * s.dx(), (static_cast<double>(j) + 0.5) * s.dy(),
          (static_cast<double>(k) + 0.5) * s.dz()};
}

/// Rasterizes the spec. Noise for voxel n is drawn from
/// CounterRng(mix_seed(seed, n)), so output is bit-identical for a fixed seed.
inline Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims d = spec.dims;
  std::vector<float> ct(d.count());
  std::vector<std::uint8_t> truth(d.count(), 0);
  std::vector<std::uint8_t> body(d.count(), 0);

  for (std::size_t k = 0; k < d.nz; ++k) {
    for (std::size_t j = 0; j < d.ny; ++j) {
      for (std::size_t i = 0; i < d.nx; ++i) {
        const std::size_t n = i + d.nx * (j + d.ny * k);
        const Vec3 p = voxel_center_mm(spec.spacing, i, j, k);
        double hu = spec.background_hu;
        if (spec.body.contains(p)) {
          body[n] = 1;
          hu = spec.body.hu;
          for (const auto& pocket : spec.pockets) {
            if (pocket.contains(p)) {
              truth[n] = 1;
              hu = pocket.hu;
              break;
            }
          }
        }
        if (spec.noise_sd > 0.0) {
          CounterRng rng(mix_seed(spec.seed, n));
          hu += spec.noise_sd * rng.normal();
        }
        ct[n] = static_cast<float>(hu);
      }
    }
  }

  Phantom out{CtVolume(d, spec.spacing, GridKind::Intensity, std::move(ct)),
              {BinaryMask(d, spec.spacing, GridKind::Binary, std::move(truth)), 0.0, 0.0},
              BinaryMask(d, spec.spacing, GridKind::Binary, std::move(body))};
  for (const auto& pocket : spec.pockets) out.truth.analytic_volume_ml += pocket.volume_mm3() / kMm3PerMl;
  out.truth.voxelized_volume_ml = mask_volume_ml(out.truth.truth_mask).volume_ml;
  return out;
}

struct HuBand {
  double lo = -20.0;
  double hi = 30.0;

  void validate() const {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, Errc::InvalidBand, "HU band needs lo < hi");
  }
};

/// Width of the linear probability ramp outside the band.
inline constexpr double kBandRampHu = 10.0;

struct BaselineSegmentation {
  BinaryMask mask;
  ProbabilityMap prob;
};

namespace detail {

inline BaselineSegmentation band_segment(const CtVolume& ct, const HuBand& band, const BinaryMask* body) {
  band.validate();
  if (body) require_same_dims(ct, *body, "body mask must match the CT lattice");
  std::vector<std::uint8_t> mask(ct.size(), 0);
  std::vector<float> prob(ct.size(), 0.0f);
  for (std::size_t n = 0; n < ct.size(); ++n) {
    if (body && !(*body)[n]) continue;
    const double v = ct[n];
    const double outside = v < band.lo ? band.lo - v : (v > band.hi ? v - band.hi : 0.0);
    mask[n] = outside == 0.0 ? 1 : 0;
    prob[n] = static_cast<float>(std::clamp(1.0 - outside / kBandRampHu, 0.0, 1.0));
  }
  return {BinaryMask(ct.dims(), ct.spacing(), GridKind::Binary, std::move(mask)),
          ProbabilityMap(ct.dims(), ct.spacing(), GridKind::Probability, std::move(prob))};
}

}  // namespace detail

/// mask = 1 where lo ≤ HU ≤ hi; prob is a trapezoid that is 1 on the band
/// and falls linearly to 0 over kBandRampHu on either side.
inline BaselineSegmentation baseline_segment(const CtVolume& ct, const HuBand& band = {}) {
  return detail::band_segment(ct, band, nullptr);
}

/// As above, restricted to voxels inside `body_mask` (zero elsewhere).
inline BaselineSegmentation baseline_segment(const CtVolume& ct, const HuBand& band, const BinaryMask& body_mask) {
  return detail::band_segment(ct, band, &body_mask);
}

// JSON form of PhantomSpec:
// {"dims": [nx, ny, nz], "spacing": [dx, dy, dz], "background_hu": -1000,
//  "noise_sd": 5, "seed": 1,
//  "body": {"center": [x, y, z], "semi_axes": [a, b, c], "hu": 50},
//  "pockets": [{"center": [...], "semi_axes": [...], "hu": 10}, ...]}

inline void to_json(nlohmann::ordered_json& j, const Ellipsoid& e) {
  j = nlohmann::ordered_json{{"center", e.center}, {"semi_axes", e.semi_axes}, {"hu", e.hu}};
}

inline void from_json(const nlohmann::ordered_json& j, Ellipsoid& e) {
  e.center = j.at("center").get<Vec3>();
  e.semi_axes = j.at("semi_axes").get<Vec3>();
  e.hu = j.at("hu").get<double>();
}

inline void to_json(nlohmann::ordered_json& j, const PhantomSpec& s) {
  j = nlohmann::ordered_json{
      {"dims", {s.dims.nx, s.dims.ny, s.dims.nz}},
      {"spacing", {s.spacing.dx(), s.spacing.dy(), s.spacing.dz()}},
      {"background_hu", s.background_hu},
      {"noise_sd", s.noise_sd},
      {"seed", s.seed},
      {"body", s.body},
      {"pockets", s.pockets},
  };
}

inline void from_json(const nlohmann::ordered_json& j, PhantomSpec& s) {
  const auto dims = j.at("dims").get<std::array<std::size_t, 3>>();
  s.dims = {dims[0], dims[1], dims[2]};
  const auto sp = j.at("spacing").get<Vec3>();
  s.spacing = VoxelSpacing(sp[0], sp[1], sp[2]);
  s.background_hu = j.value("background_hu", kAirHu);
  s.noise_sd = j.value("noise_sd", 0.0);
  s.seed = j.value("seed", std::uint64_t{0});
  s.body = j.at("body").get<Ellipsoid>();
  s.pockets = j.value("pockets", std::vector<Ellipsoid>{});
}

}  // namespace ascvol
