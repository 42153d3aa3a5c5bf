#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "ascvol/error.hpp"

namespace ascvol {

/// Physical voxel edge lengths in millimeters.
class VoxelSpacing {
 public:
  constexpr VoxelSpacing() = default;
  VoxelSpacing(double dx, double dy, double dz) : dx_(dx), dy_(dy), dz_(dz) {
    for (double d : {dx, dy, dz}) {
      require(std::isfinite(d) && d > 0.0, Errc::InvalidParameter,
              "voxel spacing must be finite and strictly positive");
    }
    require(std::isfinite(dx * dy * dz), Errc::InvalidParameter, "voxel volume overflows");
  }

  constexpr double dx() const noexcept { return dx_; }
  constexpr double dy() const noexcept { return dy_; }
  constexpr double dz() const noexcept { return dz_; }
  constexpr double max() const noexcept {
    return dx_ > dy_ ? (dx_ > dz_ ? dx_ : dz_) : (dy_ > dz_ ? dy_ : dz_);
  }

  friend constexpr bool operator==(const VoxelSpacing&, const VoxelSpacing&) = default;

 private:
  double dx_ = 1.0;
  double dy_ = 1.0;
  double dz_ = 1.0;
};

/// dx·dy·dz in mm³.
inline double unit_voxel_volume_mm3(const VoxelSpacing& s) noexcept { return s.dx() * s.dy() * s.dz(); }

/// Relative per-axis comparison, used to decide whether two grids share a lattice.
inline bool spacing_close(const VoxelSpacing& a, const VoxelSpacing& b, double rel_tol) noexcept {
  auto close = [rel_tol](double x, double y) {
    return std::abs(x - y) <= rel_tol * std::max(std::abs(x), std::abs(y));
  };
  return close(a.dx(), b.dx()) && close(a.dy(), b.dy()) && close(a.dz(), b.dz());
}

struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  constexpr std::size_t count() const noexcept { return nx * ny * nz; }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;
};

enum class GridKind {
  Intensity,    // CT values in HU
  Normalized,   // z-scored intensities
  Probability,  // values in [0, 1]
  Binary,       // values in {0, 1}
  Display,      // windowed bytes 0..255
};

constexpr std::string_view to_string(GridKind k) noexcept {
  switch (k) {
    case GridKind::Intensity: return "intensity";
    case GridKind::Normalized: return "normalized";
    case GridKind::Probability: return "probability";
    case GridKind::Binary: return "binary";
    case GridKind::Display: return "display";
  }
  return "unknown";
}

/// Dense 3D lattice. The voxel at (i, j, k) lives at linear offset
/// i + nx·(j + ny·k), which is also the NIfTI on-disk order.
template <typename T>
class Grid {
  static_assert(std::is_arithmetic_v<T>);

 public:
  using value_type = T;

  Grid() = default;

  Grid(Dims dims, VoxelSpacing spacing, GridKind kind, T fill = T{})
      : dims_(dims), spacing_(spacing), kind_(kind), values_(dims.count(), fill) {
    validate();
  }

  Grid(Dims dims, VoxelSpacing spacing, GridKind kind, std::vector<T> values)
      : dims_(dims), spacing_(spacing), kind_(kind), values_(std::move(values)) {
    validate();
  }

  const Dims& dims() const noexcept { return dims_; }
  const VoxelSpacing& spacing() const noexcept { return spacing_; }
  GridKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return values_.size(); }

  std::span<const T> values() const noexcept { return values_; }
  std::span<T> mutable_values() noexcept { return values_; }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const noexcept {
    return i + dims_.nx * (j + dims_.ny * k);
  }
  T operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept { return values_[index(i, j, k)]; }
  T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept { return values_[index(i, j, k)]; }
  T operator[](std::size_t n) const noexcept { return values_[n]; }
  T& operator[](std::size_t n) noexcept { return values_[n]; }

  /// Same lattice, different kind and values.
  template <typename U>
  Grid<U> like(GridKind kind, U fill = U{}) const {
    return Grid<U>(dims_, spacing_, kind, fill);
  }

  /// Rechecks the kind invariants; useful after editing through mutable_values().
  void validate() const {
    require(dims_.nx > 0 && dims_.ny > 0 && dims_.nz > 0, Errc::InvalidGrid, "grid dims must be positive");
    require(values_.size() == dims_.count(), Errc::InvalidGrid, "value count does not match dims");
    for (T v : values_) {
      if constexpr (std::is_floating_point_v<T>) {
        require(std::isfinite(v), Errc::InvalidGrid, "grid contains NaN or Inf");
      }
      switch (kind_) {
        case GridKind::Probability:
          require(v >= T{0} && v <= T{1}, Errc::InvalidGrid, "probability outside [0,1]");
          break;
        case GridKind::Binary:
          require(v == T{0} || v == T{1}, Errc::NonBinaryMask, "binary grid holds a value other than 0 or 1");
          break;
        case GridKind::Display:
          require(v >= T{0} && v <= T{255}, Errc::InvalidGrid, "display value outside [0,255]");
          break;
        default:
          break;
      }
    }
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_{};
  VoxelSpacing spacing_{};
  GridKind kind_ = GridKind::Intensity;
  std::vector<T> values_;
};

using CtVolume = Grid<float>;
using ProbabilityMap = Grid<float>;
using BinaryMask = Grid<std::uint8_t>;
using DisplayImage = Grid<std::uint8_t>;

template <typename A, typename B>
void require_same_dims(const Grid<A>& a, const Grid<B>& b, const std::string& what) {
  require(a.dims() == b.dims(), Errc::DimMismatch, what);
}

}  // namespace ascvol
