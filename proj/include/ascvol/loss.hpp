#pragma once

// Equal-weight soft Dice + binary cross-entropy segmentation loss with its
// closed-form gradient. Operates on flat vectors; callers flatten grids.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/numeric.hpp"

namespace ascvol {

/// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
/// before any logarithm is taken.
inline constexpr double kProbabilityClamp = 1e-7;

struct LossInputs {
  std::span<const double> y;      // labels in {0, 1}
  std::span<const double> y_hat;  // probabilities in [0, 1]
  double epsilon = 1e-5;

  std::size_t n() const noexcept { return y.size(); }

  void validate() const {
    require(y.size() == y_hat.size(), Errc::LengthMismatch, "labels and probabilities differ in length");
    require(!y.empty(), Errc::EmptyInput, "loss over zero elements");
    require(std::isfinite(epsilon) && epsilon > 0.0, Errc::InvalidParameter, "epsilon must be positive");
    for (std::size_t i = 0; i < y.size(); ++i) {
      require(y[i] == 0.0 || y[i] == 1.0, Errc::InvalidParameter, "labels must be 0 or 1");
      require(y_hat[i] >= 0.0 && y_hat[i] <= 1.0, Errc::InvalidParameter, "probabilities must lie in [0, 1]");
    }
  }
};

namespace detail {

inline double clamp_probability(double p) noexcept {
  return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
}

/// T = Σ y·ŷ and S = Σ (y + ŷ) + ε.
struct DiceSums {
  double overlap;
  double denom;
};

inline DiceSums dice_sums(const LossInputs& in) {
  const double t = pairwise_sum_index(0, in.n(), [&](std::size_t i) { return in.y[i] * in.y_hat[i]; });
  const double s = pairwise_sum_index(0, in.n(), [&](std::size_t i) { return in.y[i] + in.y_hat[i]; });
  return {t, s + in.epsilon};
}

}  // namespace detail

/// 1 - 2·Σyŷ / (Σ(y+ŷ) + ε). With both sums zero this is exactly 1; the
/// formula is kept literal rather than special-casing empty-vs-empty to 0.
inline double soft_dice_loss(const LossInputs& in) {
  in.validate();
  const auto [t, s] = detail::dice_sums(in);
  return 1.0 - 2.0 * t / s;
}

/// Mean binary cross-entropy, natural log.
inline double bce_loss(const LossInputs& in) {
  in.validate();
  const double sum = pairwise_sum_index(0, in.n(), [&](std::size_t i) {
    const double p = detail::clamp_probability(in.y_hat[i]);
    return in.y[i] * std::log(p) + (1.0 - in.y[i]) * std::log1p(-p);
  });
  return -sum / static_cast<double>(in.n());
}

/// Dice loss plus BCE, both nonnegative, equal weights.
inline double combined_loss(const LossInputs& in) { return soft_dice_loss(in) + bce_loss(in); }

/// ∂L/∂ŷᵢ = -(2yᵢS - 2T)/S² - (1/N)(yᵢ/ŷᵢ - (1-yᵢ)/(1-ŷᵢ)), evaluated at the
/// clamped probability.
inline std::vector<double> combined_loss_grad(const LossInputs& in) {
  in.validate();
  const auto [t, s] = detail::dice_sums(in);
  const double inv_n = 1.0 / static_cast<double>(in.n());
  std::vector<double> g(in.n());
  for (std::size_t i = 0; i < in.n(); ++i) {
    const double yi = in.y[i];
    const double p = detail::clamp_probability(in.y_hat[i]);
    const double dice = -(2.0 * yi * s - 2.0 * t) / (s * s);
    const double bce = -inv_n * (yi / p - (1.0 - yi) / (1.0 - p));
    g[i] = dice + bce;
  }
  return g;
}

}  // namespace ascvol
