#pragma once

// Mask volumetry, the 50 mL detection rule, percent volume error and the
// decomposition of fluid into connected pockets.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"

namespace ascvol {

inline constexpr double kMm3PerMl = 1000.0;

struct DetectionPolicy {
  double threshold_ml = 50.0;

  void validate() const {
    require(std::isfinite(threshold_ml) && threshold_ml >= 0.0, Errc::InvalidParameter,
            "detection threshold must be a nonnegative volume");
  }
};

enum class Category { Ascites, NoAscites };

constexpr std::string_view to_string(Category c) noexcept {
  return c == Category::Ascites ? "ascites" : "no-ascites";
}

struct Detection {
  bool detected = false;
  Category category = Category::NoAscites;
};

/// Positive iff volume >= threshold: only volumes strictly below the
/// threshold fall in the negative class.
inline Detection detect(double volume_ml, const DetectionPolicy& policy = {}) {
  policy.validate();
  require(std::isfinite(volume_ml) && volume_ml >= 0.0, Errc::InvalidParameter, "volume must be nonnegative");
  const bool positive = volume_ml >= policy.threshold_ml;
  return {positive, positive ? Category::Ascites : Category::NoAscites};
}

struct MaskVolume {
  std::uint64_t voxel_count = 0;
  double volume_ml = 0.0;
};

struct VolumeResult {
  std::uint64_t voxel_count = 0;
  double volume_ml = 0.0;
  bool detected = false;
  Category category = Category::NoAscites;
};

inline double voxels_to_ml(std::uint64_t count, const VoxelSpacing& spacing) {
  return static_cast<double>(count) * unit_voxel_volume_mm3(spacing) / kMm3PerMl;
}

inline MaskVolume mask_volume_ml(const BinaryMask& mask) {
  std::uint64_t count = 0;
  for (auto v : mask.values()) count += v;
  return {count, voxels_to_ml(count, mask.spacing())};
}

inline VolumeResult quantify(const BinaryMask& mask, const DetectionPolicy& policy = {}) {
  const auto [count, ml] = mask_volume_ml(mask);
  const auto d = detect(ml, policy);
  return {count, ml, d.detected, d.category};
}

/// 100·|pred - ref| / ref, i.e. relative to the reference (true) volume.
inline double percent_volume_error(double pred_ml, double ref_ml) {
  require(ref_ml != 0.0, Errc::ZeroReference, "percent error against a zero reference volume");
  require(ref_ml > 0.0 && pred_ml >= 0.0, Errc::InvalidParameter, "volumes must be nonnegative");
  return 100.0 * std::abs(pred_ml - ref_ml) / ref_ml;
}

enum class Connectivity { Face6 = 6, Full26 = 26 };

inline Connectivity connectivity_from_int(int n) {
  require(n == 6 || n == 26, Errc::InvalidParameter, "connectivity must be 6 or 26");
  return static_cast<Connectivity>(n);
}

struct ComponentLabels {
  std::vector<std::uint32_t> labels;   // 0 = background, components numbered from 1
  std::vector<std::uint64_t> sizes;    // sizes[c - 1] = voxel count of component c
};

/// Flood-fill labeling in raster order, so component numbering is
/// deterministic (by first voxel encountered).
inline ComponentLabels label_components(const BinaryMask& mask, Connectivity conn = Connectivity::Full26) {
  const Dims d = mask.dims();
  ComponentLabels out;
  out.labels.assign(mask.size(), 0);

  std::vector<std::array<int, 3>> offsets;
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (conn == Connectivity::Face6 && manhattan != 1) continue;
        offsets.push_back({dx, dy, dz});
      }
    }
  }

  const auto nx = static_cast<std::int64_t>(d.nx);
  const auto ny = static_cast<std::int64_t>(d.ny);
  const auto nz = static_cast<std::int64_t>(d.nz);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t seed = 0; seed < mask.size(); ++seed) {
    if (!mask[seed] || out.labels[seed]) continue;
    const std::uint32_t label = ++next;
    std::uint64_t size = 0;
    out.labels[seed] = label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t at = stack.back();
      stack.pop_back();
      ++size;
      const auto i = static_cast<std::int64_t>(at % d.nx);
      const auto j = static_cast<std::int64_t>((at / d.nx) % d.ny);
      const auto k = static_cast<std::int64_t>(at / (d.nx * d.ny));
      for (const auto& o : offsets) {
        const std::int64_t x = i + o[0], y = j + o[1], z = k + o[2];
        if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny || z >= nz) continue;
        const auto nb = static_cast<std::size_t>(x + nx * (y + ny * z));
        if (mask[nb] && !out.labels[nb]) {
          out.labels[nb] = label;
          stack.push_back(nb);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

struct PocketReport {
  std::size_t n_components = 0;
  std::vector<std::uint64_t> component_voxels;  // descending
  std::vector<double> component_volumes_ml;     // descending, parallel to component_voxels
  std::optional<double> largest_fraction;       // absent for an empty mask
};

inline PocketReport connected_pockets(const BinaryMask& mask, Connectivity conn = Connectivity::Full26) {
  auto labels = label_components(mask, conn);
  PocketReport r;
  r.n_components = labels.sizes.size();
  r.component_voxels = std::move(labels.sizes);
  std::sort(r.component_voxels.begin(), r.component_voxels.end(), std::greater<>());
  std::uint64_t total = 0;
  for (auto c : r.component_voxels) {
    total += c;
    r.component_volumes_ml.push_back(voxels_to_ml(c, mask.spacing()));
  }
  if (total > 0) r.largest_fraction = static_cast<double>(r.component_voxels.front()) / static_cast<double>(total);
  return r;
}

/// One scan's predicted and reference volumes; the unit of aggregation.
struct CaseRecord {
  std::string case_id;
  double pred_ml = 0.0;
  double ref_ml = 0.0;
};

/// How a case enters batch evaluation. Only BothPositive cases contribute
/// overlap and volume-error statistics; all four count in the confusion matrix.
enum class Inclusion {
  BothPositive,
  FalsePositive,  // predicted >= threshold, reference below
  FalseNegative,  // predicted below threshold, reference >= threshold
  BothNegative,
};

constexpr std::string_view to_string(Inclusion inc) noexcept {
  switch (inc) {
    case Inclusion::BothPositive: return "included";
    case Inclusion::FalsePositive: return "excluded:false_positive";
    case Inclusion::FalseNegative: return "excluded:false_negative";
    case Inclusion::BothNegative: return "excluded:no_ascites";
  }
  return "unknown";
}

inline Inclusion classify(const CaseRecord& c, const DetectionPolicy& policy = {}) {
  const bool pred = detect(c.pred_ml, policy).detected;
  const bool ref = detect(c.ref_ml, policy).detected;
  if (pred && ref) return Inclusion::BothPositive;
  if (pred) return Inclusion::FalsePositive;
  if (ref) return Inclusion::FalseNegative;
  return Inclusion::BothNegative;
}

}  // namespace ascvol
