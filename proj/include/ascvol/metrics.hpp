#pragma once

// Voxel overlap metrics for one prediction/reference pair and scan-level
// detection metrics over a set of cases.
//
// Ratios whose denominator is zero are reported as std::nullopt, never 0.
// Aggregations skip them and count how many were skipped.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"
#include "ascvol/quantify.hpp"

namespace ascvol {

using Ratio = std::optional<double>;

inline Ratio safe_ratio(double num, double den) {
  if (den == 0.0) return std::nullopt;
  return num / den;
}

struct OverlapCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const OverlapCounts&, const OverlapCounts&) = default;
};

inline constexpr double kSpacingRelTolerance = 1e-4;

inline OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& ref) {
  require_same_dims(pred, ref, "prediction and reference lattices differ");
  require(spacing_close(pred.spacing(), ref.spacing(), kSpacingRelTolerance), Errc::SpacingMismatch,
          "prediction and reference spacing differ");
  // counts[2·pred + ref]
  std::array<std::uint64_t, 4> counts{};
  const auto p = pred.values();
  const auto r = ref.values();
  for (std::size_t n = 0; n < p.size(); ++n) ++counts[(p[n] << 1) | r[n]];
  return {counts[3], counts[2], counts[1], counts[0]};
}

struct OverlapMetrics {
  Ratio dice;
  Ratio precision;
  Ratio recall;
  Ratio specificity;

  /// Names of the undefined metrics, e.g. "precision_undefined".
  std::vector<std::string> flags() const {
    std::vector<std::string> out;
    if (!dice) out.emplace_back("dice_undefined");
    if (!precision) out.emplace_back("precision_undefined");
    if (!recall) out.emplace_back("recall_undefined");
    if (!specificity) out.emplace_back("specificity_undefined");
    return out;
  }
};

inline OverlapMetrics overlap_metrics(const OverlapCounts& c) {
  const auto tp = static_cast<double>(c.tp);
  const auto fp = static_cast<double>(c.fp);
  const auto fn = static_cast<double>(c.fn);
  const auto tn = static_cast<double>(c.tn);
  return {safe_ratio(2.0 * tp, 2.0 * tp + fp + fn), safe_ratio(tp, tp + fp), safe_ratio(tp, tp + fn),
          safe_ratio(tn, tn + fp)};
}

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Tallies predicted-vs-reference positivity under the detection rule.
inline ConfusionMatrix detection_confusion(std::span<const CaseRecord> cases, const DetectionPolicy& policy = {}) {
  ConfusionMatrix m;
  for (const auto& c : cases) {
    switch (classify(c, policy)) {
      case Inclusion::BothPositive: ++m.tp; break;
      case Inclusion::FalsePositive: ++m.fp; break;
      case Inclusion::FalseNegative: ++m.fn; break;
      case Inclusion::BothNegative: ++m.tn; break;
    }
  }
  return m;
}

/// Confusion counts from paired binary outcomes.
inline ConfusionMatrix confusion_from_labels(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> ref) {
  require(pred.size() == ref.size(), Errc::LengthMismatch, "outcome vectors differ in length");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && ref[i]) ++m.tp;
    else if (pred[i]) ++m.fp;
    else if (ref[i]) ++m.fn;
    else ++m.tn;
  }
  return m;
}

struct DetectionMetrics {
  Ratio accuracy;
  Ratio precision;
  Ratio recall;
  Ratio f1;
};

namespace detail {

inline DetectionMetrics detection_ratios(const ConfusionMatrix& m) {
  const auto tp = static_cast<double>(m.tp);
  const auto fp = static_cast<double>(m.fp);
  const auto fn = static_cast<double>(m.fn);
  DetectionMetrics out{safe_ratio(tp + static_cast<double>(m.tn), static_cast<double>(m.total())),
                       safe_ratio(tp, tp + fp), safe_ratio(tp, tp + fn), std::nullopt};
  if (out.precision && out.recall) out.f1 = safe_ratio(2.0 * *out.precision * *out.recall, *out.precision + *out.recall);
  return out;
}

}  // namespace detail

inline DetectionMetrics detection_metrics(const ConfusionMatrix& m) {
  require(m.total() > 0, Errc::EmptyMatrix, "detection metrics of an empty confusion matrix");
  return detail::detection_ratios(m);
}

/// Fixed column order of the per-case metric CSV.
inline constexpr std::array<std::string_view, 9> kMetricCsvColumns{
    "case_id", "dice", "precision", "recall", "specificity", "pred_ml", "ref_ml", "pct_error", "flags"};

}  // namespace ascvol
