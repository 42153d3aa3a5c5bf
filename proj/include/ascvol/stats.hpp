#pragma once

// Statistical battery: percentile bootstrap, mean ± SD with CI, median/IQR,
// Pearson r², Bland-Altman agreement and a normal-approximation sample size.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/metrics.hpp"
#include "ascvol/numeric.hpp"
#include "ascvol/preprocess.hpp"
#include "ascvol/random.hpp"

namespace ascvol {

inline constexpr std::string_view kBootstrapMethod = "percentile";
inline constexpr std::string_view kPercentileMethod = "linear-interpolation-(n-1)-ranks";

struct BootstrapConfig {
  std::size_t n_resamples = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 1;  // output is identical for any value

  void validate() const {
    require(n_resamples >= 1, Errc::InvalidParameter, "n_resamples must be at least 1");
    require(alpha > 0.0 && alpha < 1.0, Errc::InvalidParameter, "alpha must lie in (0, 1)");
  }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Result of a bootstrap whose statistic may be undefined on some replicates
/// (e.g. precision when a resample has no predicted positives). Undefined
/// replicates are dropped; `ci` is absent when none remain.
struct BootstrapResult {
  std::optional<Interval> ci;
  std::size_t n_valid = 0;
};

/// Percentile bootstrap over resampled index vectors. Replicate k draws its
/// indices from CounterRng(mix_seed(seed, k)), so any partition of the
/// replicates across threads yields the same replicate values.
template <typename Statistic>
BootstrapResult bootstrap_indices(std::size_t n, Statistic&& statistic, const BootstrapConfig& cfg) {
  cfg.validate();
  require(n > 0, Errc::EmptyInput, "bootstrap of an empty sample");
  std::vector<std::optional<double>> replicate(cfg.n_resamples);

  auto run = [&](std::size_t first, std::size_t last) {
    auto stat = statistic;  // per-worker copy; statistics may hold scratch buffers
    std::vector<std::size_t> idx(n);
    for (std::size_t k = first; k < last; ++k) {
      CounterRng rng(mix_seed(cfg.seed, k));
      for (auto& i : idx) i = static_cast<std::size_t>(rng.bounded(n));
      replicate[k] = stat(std::span<const std::size_t>(idx));
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.threads, 1, cfg.n_resamples);
  if (workers == 1) {
    run(0, cfg.n_resamples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (cfg.n_resamples + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t first = w * chunk;
      const std::size_t last = std::min(cfg.n_resamples, first + chunk);
      if (first < last) pool.emplace_back(run, first, last);
    }
  }

  std::vector<double> values;
  values.reserve(replicate.size());
  for (const auto& r : replicate) {
    if (r) values.push_back(*r);
  }
  BootstrapResult out;
  out.n_valid = values.size();
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  out.ci = Interval{percentile_sorted(values, 100.0 * cfg.alpha / 2.0),
                    percentile_sorted(values, 100.0 * (1.0 - cfg.alpha / 2.0))};
  return out;
}

inline double mean_of(std::span<const double> xs) {
  require(!xs.empty(), Errc::EmptyInput, "mean of an empty sample");
  return pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> xs) {
  require(xs.size() >= 2, Errc::TooFewSamples, "sample sd needs at least two values");
  const double m = mean_of(xs);
  const double ss = pairwise_sum(xs, [m](std::size_t, double x) { return (x - m) * (x - m); });
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

enum class Reducer { Mean, Median, Proportion };

constexpr std::string_view to_string(Reducer r) noexcept {
  switch (r) {
    case Reducer::Mean: return "mean";
    case Reducer::Median: return "median";
    case Reducer::Proportion: return "proportion";
  }
  return "unknown";
}

/// Percentile-bootstrap CI of a scalar reducer.
inline Interval bootstrap_ci(std::span<const double> samples, Reducer reducer, const BootstrapConfig& cfg = {}) {
  require(!samples.empty(), Errc::EmptyInput, "bootstrap of an empty sample");
  if (reducer == Reducer::Proportion) {
    for (double s : samples) {
      require(s == 0.0 || s == 1.0, Errc::InvalidParameter, "proportion reducer needs 0/1 samples");
    }
  }
  std::vector<double> buf;
  auto statistic = [&, buf](std::span<const std::size_t> idx) mutable -> std::optional<double> {
    buf.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) buf[i] = samples[idx[i]];
    if (reducer == Reducer::Median) {
      std::sort(buf.begin(), buf.end());
      return percentile_sorted(buf, 50.0);
    }
    return pairwise_sum(std::span<const double>(buf)) / static_cast<double>(buf.size());
  };
  const auto r = bootstrap_indices(samples.size(), statistic, cfg);
  return *r.ci;
}

enum class DetectionStatistic { Accuracy, Precision, Recall, F1 };

constexpr std::string_view to_string(DetectionStatistic s) noexcept {
  switch (s) {
    case DetectionStatistic::Accuracy: return "accuracy";
    case DetectionStatistic::Precision: return "precision";
    case DetectionStatistic::Recall: return "recall";
    case DetectionStatistic::F1: return "f1";
  }
  return "unknown";
}

/// Bootstrap CI of a detection metric computed from paired per-scan labels
/// (cases are resampled as pairs).
inline BootstrapResult bootstrap_detection_ci(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> ref,
                                              DetectionStatistic which, const BootstrapConfig& cfg = {}) {
  require(pred.size() == ref.size(), Errc::LengthMismatch, "outcome vectors differ in length");
  auto statistic = [&](std::span<const std::size_t> idx) -> std::optional<double> {
    ConfusionMatrix m;
    for (auto i : idx) {
      if (pred[i] && ref[i]) ++m.tp;
      else if (pred[i]) ++m.fp;
      else if (ref[i]) ++m.fn;
      else ++m.tn;
    }
    const auto d = detail::detection_ratios(m);
    switch (which) {
      case DetectionStatistic::Accuracy: return d.accuracy;
      case DetectionStatistic::Precision: return d.precision;
      case DetectionStatistic::Recall: return d.recall;
      case DetectionStatistic::F1: return d.f1;
    }
    return std::nullopt;
  };
  return bootstrap_indices(pred.size(), statistic, cfg);
}

struct MeanSdCi {
  double mean = 0.0;
  double sd = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

/// Mean, sample SD and a bootstrap CI of the mean.
inline MeanSdCi mean_sd_ci(std::span<const double> samples, const BootstrapConfig& cfg = {}) {
  require(samples.size() >= 2, Errc::TooFewSamples, "mean ± SD needs at least two values");
  const auto ci = bootstrap_ci(samples, Reducer::Mean, cfg);
  return {mean_of(samples), sample_sd(samples), ci.lo, ci.hi};
}

struct MedianIqr {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

inline MedianIqr median_iqr(std::span<const double> samples) {
  require(!samples.empty(), Errc::EmptyInput, "median of an empty sample");
  const auto s = sorted_copy(samples);
  return {percentile_sorted(s, 50.0), percentile_sorted(s, 25.0), percentile_sorted(s, 75.0)};
}

enum class R2Domain { Raw, Log };

/// Squared Pearson correlation. The log domain correlates ln(x) with ln(y)
/// and requires strictly positive inputs.
inline double pearson_r2(std::span<const double> x, std::span<const double> y, R2Domain domain = R2Domain::Raw) {
  require(x.size() == y.size(), Errc::LengthMismatch, "r² inputs differ in length");
  require(x.size() >= 2, Errc::TooFewSamples, "r² needs at least two pairs");
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ys(y.begin(), y.end());
  if (domain == R2Domain::Log) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      require(xs[i] > 0.0 && ys[i] > 0.0, Errc::InvalidParameter, "log-domain r² needs positive values");
      xs[i] = std::log(xs[i]);
      ys[i] = std::log(ys[i]);
    }
  }
  const double mx = mean_of(xs);
  const double my = mean_of(ys);
  const std::span<const double> xv(xs);
  const double sxx = pairwise_sum(xv, [mx](std::size_t, double v) { return (v - mx) * (v - mx); });
  const double syy = pairwise_sum(std::span<const double>(ys), [my](std::size_t, double v) { return (v - my) * (v - my); });
  const double sxy = pairwise_sum(xv, [&](std::size_t i, double v) { return (v - mx) * (ys[i] - my); });
  require(sxx > 0.0 && syy > 0.0, Errc::ConstantInput, "r² undefined for a constant input");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return r * r;
}

/// Limits of agreement use this fixed multiplier, independent of alpha.
inline constexpr double kLoaMultiplier = 1.96;

struct BlandAltmanPoint {
  double mean = 0.0;  // (pred + ref) / 2
  double diff = 0.0;  // pred - ref
};

struct BlandAltman {
  double bias = 0.0;
  double sd_diff = 0.0;
  double loa_lo = 0.0;
  double loa_hi = 0.0;
  std::vector<BlandAltmanPoint> points;
};

inline BlandAltman bland_altman(std::span<const double> pred, std::span<const double> ref) {
  require(pred.size() == ref.size(), Errc::LengthMismatch, "Bland-Altman inputs differ in length");
  require(pred.size() >= 2, Errc::TooFewSamples, "Bland-Altman needs at least two pairs");
  BlandAltman ba;
  std::vector<double> diff(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    diff[i] = pred[i] - ref[i];
    ba.points.push_back({(pred[i] + ref[i]) / 2.0, diff[i]});
  }
  ba.bias = mean_of(diff);
  ba.sd_diff = sample_sd(diff);
  ba.loa_lo = ba.bias - kLoaMultiplier * ba.sd_diff;
  ba.loa_hi = ba.bias + kLoaMultiplier * ba.sd_diff;
  return ba;
}

struct AgreementResult {
  double r2 = 0.0;
  double bias = 0.0;
  double loa_lo = 0.0;
  double loa_hi = 0.0;
  double sd_diff = 0.0;
};

/// r² and Bland-Altman summary of predicted vs reference volumes (liters).
inline AgreementResult agreement(std::span<const double> pred_l, std::span<const double> ref_l,
                                 R2Domain domain = R2Domain::Raw) {
  const auto ba = bland_altman(pred_l, ref_l);
  return {pearson_r2(ref_l, pred_l, domain), ba.bias, ba.loa_lo, ba.loa_hi, ba.sd_diff};
}

/// Standard normal quantile. Acklam's rational approximation (relative error
/// about 1.15e-9) followed by one Halley step against erfc, which brings the
/// result to near double precision.
inline double normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, Errc::InvalidParameter, "normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.14159265358979323846) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// n = ⌈((z_{1-α/2} + z_{power}) / d)²⌉.
inline std::uint64_t power_sample_size(double effect_size, double alpha, double power) {
  require(std::isfinite(effect_size) && effect_size > 0.0, Errc::InvalidParameter, "effect size must be positive");
  require(alpha > 0.0 && alpha < 1.0, Errc::InvalidParameter, "alpha must lie in (0, 1)");
  require(power > 0.0 && power < 1.0, Errc::InvalidParameter, "power must lie in (0, 1)");
  const double z = (normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power)) / effect_size;
  const double n = z * z;
  // Guard against a value that is an integer up to rounding noise.
  return static_cast<std::uint64_t>(std::ceil(n * (1.0 - 1e-12)));
}

}  // namespace ascvol
