#pragma once

// Intensity pipeline: foreground percentile clipping, dataset-global z-score
// normalization, and HU display windowing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"
#include "json.hpp"

namespace ascvol {

/// Percentile of already-sorted data by linear interpolation between the
/// (n-1)-spaced order statistics: rank r = p/100·(n-1).
inline double percentile_sorted(std::span<const double> sorted, double p) {
  require(!sorted.empty(), Errc::EmptyInput, "percentile of an empty array");
  require(p >= 0.0 && p <= 100.0, Errc::InvalidParameter, "percentile must lie in [0, 100]");
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

template <typename T>
std::vector<double> sorted_copy(std::span<const T> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  return v;
}

template <typename T>
double percentile(std::span<const T> values, double p) {
  require(!values.empty(), Errc::EmptyInput, "percentile of an empty array");
  return percentile_sorted(sorted_copy(values), p);
}

inline double percentile(const std::vector<double>& values, double p) {
  return percentile(std::span<const double>(values), p);
}

class ClipSpec {
 public:
  ClipSpec() = default;
  ClipSpec(double lo_percentile, double hi_percentile) : lo_(lo_percentile), hi_(hi_percentile) {
    require(lo_ >= 0.0 && lo_ < 100.0 && hi_ > 0.0 && hi_ <= 100.0 && lo_ < hi_, Errc::InvalidParameter,
            "clip percentiles must satisfy 0 <= lo < hi <= 100");
  }
  double lo_percentile() const noexcept { return lo_; }
  double hi_percentile() const noexcept { return hi_; }

 private:
  double lo_ = 0.5;
  double hi_ = 99.5;
};

struct IntensityBand {
  double lo;
  double hi;
};

namespace detail {

inline IntensityBand band_from(std::vector<double> samples, const ClipSpec& spec) {
  std::sort(samples.begin(), samples.end());
  return {percentile_sorted(samples, spec.lo_percentile()), percentile_sorted(samples, spec.hi_percentile())};
}

}  // namespace detail

/// Clamps every voxel into a fixed band. Idempotent for a given band;
/// re-deriving the band from already clipped data can tighten it slightly.
inline CtVolume clip_to_band(const CtVolume& grid, IntensityBand band) {
  require(band.lo <= band.hi, Errc::InvalidParameter, "clip band must satisfy lo <= hi");
  CtVolume out = grid;
  const auto lo = static_cast<float>(band.lo);
  const auto hi = static_cast<float>(band.hi);
  for (float& v : out.mutable_values()) v = std::clamp(v, lo, hi);
  return out;
}

/// Clipping band over every voxel.
inline IntensityBand percentile_band(const CtVolume& grid, const ClipSpec& spec = {}) {
  return detail::band_from({grid.values().begin(), grid.values().end()}, spec);
}

/// Clipping band over the voxels selected by `foreground`.
inline IntensityBand percentile_band(const CtVolume& grid, const BinaryMask& foreground, const ClipSpec& spec = {}) {
  require_same_dims(grid, foreground, "foreground mask must match the CT lattice");
  std::vector<double> fg;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    if (foreground[n]) fg.push_back(grid[n]);
  }
  require(!fg.empty(), Errc::EmptyForeground, "foreground mask selects no voxels");
  return detail::band_from(std::move(fg), spec);
}

inline CtVolume clip_to_percentiles(const CtVolume& grid, const ClipSpec& spec = {}) {
  return clip_to_band(grid, percentile_band(grid, spec));
}

/// Percentiles come from the foreground voxels; the clamp applies everywhere,
/// so background air is lifted to the lower bound.
inline CtVolume clip_to_percentiles(const CtVolume& grid, const BinaryMask& foreground, const ClipSpec& spec = {}) {
  return clip_to_band(grid, percentile_band(grid, foreground, spec));
}

struct NormStats {
  double mean = 0.0;
  double sd = 1.0;
};

/// Population statistics accumulated over a whole dataset.
struct DatasetStats {
  double mean = 0.0;
  double sd = 0.0;
  std::uint64_t n_voxels = 0;

  NormStats norm() const { return {mean, sd}; }
};

inline void to_json(nlohmann::ordered_json& j, const DatasetStats& s) {
  j = nlohmann::ordered_json{{"mean", s.mean}, {"sd", s.sd}, {"n_voxels", s.n_voxels}};
}

inline void from_json(const nlohmann::ordered_json& j, DatasetStats& s) {
  s.mean = j.at("mean").get<double>();
  s.sd = j.at("sd").get<double>();
  s.n_voxels = j.at("n_voxels").get<std::uint64_t>();
}

/// Streaming population mean/variance (Chan et al. pairwise merge of Welford
/// accumulators), one accumulator per grid.
class DatasetStatsAccumulator {
 public:
  void add(const CtVolume& grid) { merge(accumulate(grid, nullptr)); }

  void add(const CtVolume& grid, const BinaryMask& foreground) {
    require_same_dims(grid, foreground, "foreground mask must match the CT lattice");
    merge(accumulate(grid, &foreground));
  }

  DatasetStats result() const {
    require(n_ > 0, Errc::EmptyInput, "no voxels accumulated");
    return {mean_, std::sqrt(m2_ / static_cast<double>(n_)), n_};
  }

 private:
  struct Partial {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };

  static Partial accumulate(const CtVolume& grid, const BinaryMask* fg) {
    Partial p;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (fg && !(*fg)[i]) continue;
      ++p.n;
      const double x = grid[i];
      const double delta = x - p.mean;
      p.mean += delta / static_cast<double>(p.n);
      p.m2 += delta * (x - p.mean);
    }
    return p;
  }

  void merge(const Partial& p) {
    if (p.n == 0) return;
    const double n = static_cast<double>(n_ + p.n);
    const double delta = p.mean - mean_;
    mean_ += delta * static_cast<double>(p.n) / n;
    m2_ += p.m2 + delta * delta * static_cast<double>(n_) * static_cast<double>(p.n) / n;
    n_ += p.n;
  }

  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// (v - mean) / sd with dataset-level statistics supplied by the caller.
inline Grid<float> zscore_normalize(const CtVolume& grid, const NormStats& stats) {
  require(std::isfinite(stats.sd) && stats.sd > 0.0, Errc::ZeroSd, "normalization sd must be positive");
  std::vector<float> out(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) {
    out[n] = static_cast<float>((static_cast<double>(grid[n]) - stats.mean) / stats.sd);
  }
  return Grid<float>(grid.dims(), grid.spacing(), GridKind::Normalized, std::move(out));
}

class WindowSpec {
 public:
  WindowSpec() = default;
  WindowSpec(double center, double width) : center_(center), width_(width) {
    require(std::isfinite(center) && std::isfinite(width) && width > 0.0, Errc::InvalidParameter,
            "window width must be positive");
  }
  double center() const noexcept { return center_; }
  double width() const noexcept { return width_; }

 private:
  double center_ = 50.0;
  double width_ = 350.0;
};

/// Linear map of [center - width/2, center + width/2] onto [0, 255], clamped,
/// rounded half-up.
inline std::uint8_t window_value(double hu, const WindowSpec& spec) {
  const double lo = spec.center() - spec.width() / 2.0;
  const double scaled = (hu - lo) / spec.width() * 255.0;
  const double rounded = std::floor(std::clamp(scaled, 0.0, 255.0) + 0.5);
  return static_cast<std::uint8_t>(std::min(rounded, 255.0));
}

inline DisplayImage apply_window(const CtVolume& grid, const WindowSpec& spec = {}) {
  std::vector<std::uint8_t> out(grid.size());
  for (std::size_t n = 0; n < grid.size(); ++n) out[n] = window_value(grid[n], spec);
  return DisplayImage(grid.dims(), grid.spacing(), GridKind::Display, std::move(out));
}

}  // namespace ascvol
