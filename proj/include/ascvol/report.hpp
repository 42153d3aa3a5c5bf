#pragma once

// Batch evaluation over a manifest of cases and report emission (JSON/CSV).
//
// Inclusion protocol: a case contributes overlap and volume-error statistics
// only when both its predicted and reference volumes pass the detection rule.
// Every successfully loaded case counts in the confusion matrix. Cases that
// fail to load are listed under "failures" and excluded from all aggregates.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ascvol/csv.hpp"
#include "ascvol/error.hpp"
#include "ascvol/metrics.hpp"
#include "ascvol/nifti.hpp"
#include "ascvol/quantify.hpp"
#include "ascvol/stats.hpp"
#include "ascvol/version.hpp"
#include "json.hpp"

namespace ascvol {

using Json = nlohmann::ordered_json;

struct ManifestRow {
  std::string case_id;
  std::filesystem::path pred_mask_path;
  std::optional<std::filesystem::path> ref_mask_path;
  std::optional<std::filesystem::path> ct_path;
};

/// CSV with header; columns case_id and pred_mask_path are required,
/// ref_mask_path and ct_path optional. Relative paths resolve against the
/// manifest's directory.
struct Manifest {
  std::vector<ManifestRow> rows;

  static Manifest parse(std::istream& in, const std::filesystem::path& base_dir) {
    const auto table = csv::read_table(in);
    const auto id_col = table.column("case_id");
    const auto pred_col = table.column("pred_mask_path");
    require(id_col && pred_col, Errc::ManifestError, "manifest header needs case_id and pred_mask_path");
    const auto ref_col = table.column("ref_mask_path");
    const auto ct_col = table.column("ct_path");

    auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : base_dir / path;
    };
    auto cell = [](const csv::Row& row, std::optional<std::size_t> col) -> std::optional<std::string> {
      if (!col || *col >= row.size() || row[*col].empty()) return std::nullopt;
      return row[*col];
    };

    Manifest m;
    std::set<std::string> ids;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      const auto id = cell(row, id_col);
      const auto pred = cell(row, pred_col);
      require(id && pred, Errc::ManifestError, "manifest row " + std::to_string(r + 2) + " lacks case_id or pred_mask_path");
      require(ids.insert(*id).second, Errc::ManifestError, "duplicate case_id " + *id);
      ManifestRow mr{*id, resolve(*pred), std::nullopt, std::nullopt};
      if (auto ref = cell(row, ref_col)) mr.ref_mask_path = resolve(*ref);
      if (auto ct = cell(row, ct_col)) mr.ct_path = resolve(*ct);
      m.rows.push_back(std::move(mr));
    }
    return m;
  }

  static Manifest load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), Errc::ManifestError, "cannot open manifest " + path.string());
    return parse(in, path.parent_path());
  }
};

/// Outcome of evaluating one case.
struct CaseEvaluation {
  std::string case_id;
  std::optional<std::string> error;  // set when the case failed to load or compare
  std::optional<VolumeResult> pred;
  std::optional<VolumeResult> ref;
  std::optional<OverlapCounts> counts;
  Inclusion inclusion = Inclusion::BothNegative;
  std::optional<OverlapMetrics> metrics;  // only for included cases
  std::optional<double> pct_error;        // only for included cases

  bool ok() const noexcept { return !error.has_value(); }
  bool included() const noexcept { return ok() && inclusion == Inclusion::BothPositive; }

  std::vector<std::string> flags() const {
    std::vector<std::string> f;
    if (error) {
      f.push_back("error");
      return f;
    }
    if (!included()) f.emplace_back(to_string(inclusion));
    if (metrics) {
      for (auto& s : metrics->flags()) f.push_back(std::move(s));
    }
    return f;
  }

  CaseRecord record() const { return {case_id, pred ? pred->volume_ml : 0.0, ref ? ref->volume_ml : 0.0}; }
};

inline CaseEvaluation evaluate_case(std::string case_id, const BinaryMask& pred, const BinaryMask& ref,
                                    const DetectionPolicy& policy) {
  CaseEvaluation ce;
  ce.case_id = std::move(case_id);
  ce.pred = quantify(pred, policy);
  ce.ref = quantify(ref, policy);
  ce.counts = overlap_counts(pred, ref);
  ce.inclusion = classify(ce.record(), policy);
  if (ce.inclusion == Inclusion::BothPositive) {
    ce.metrics = overlap_metrics(*ce.counts);
    ce.pct_error = percent_volume_error(ce.pred->volume_ml, ce.ref->volume_ml);
  }
  return ce;
}

/// mean ± SD with bootstrap CI over the defined values; undefined values
/// are skipped and counted.
struct MetricAggregate {
  std::string metric;
  std::size_t n = 0;
  std::size_t n_skipped = 0;
  std::optional<double> mean;
  std::optional<double> sd;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
};

inline MetricAggregate aggregate_metric(std::string metric, std::span<const Ratio> values, const BootstrapConfig& cfg) {
  MetricAggregate a;
  a.metric = std::move(metric);
  std::vector<double> defined;
  for (const auto& v : values) {
    if (v) defined.push_back(*v);
    else ++a.n_skipped;
  }
  a.n = defined.size();
  if (a.n >= 1) a.mean = mean_of(defined);
  if (a.n >= 2) {
    const auto s = mean_sd_ci(defined, cfg);
    a.sd = s.sd;
    a.ci_lo = s.ci_lo;
    a.ci_hi = s.ci_hi;
  }
  return a;
}

struct DetectionEntry {
  std::string metric;
  Ratio value;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::size_t n_valid_resamples = 0;
};

/// Confusion matrix and accuracy/precision/recall/F1 with bootstrap CIs.
struct DetectionSummary {
  ConfusionMatrix confusion;
  std::vector<DetectionEntry> metrics;  // accuracy, precision, recall, f1; empty for zero cases
};

inline DetectionSummary summarize_detection(std::span<const CaseRecord> cases, const DetectionPolicy& policy,
                                            const BootstrapConfig& cfg) {
  DetectionSummary s;
  s.confusion = detection_confusion(cases, policy);
  if (cases.empty()) return s;
  const auto point = detection_metrics(s.confusion);
  std::vector<std::uint8_t> pred(cases.size());
  std::vector<std::uint8_t> ref(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    pred[i] = detect(cases[i].pred_ml, policy).detected;
    ref[i] = detect(cases[i].ref_ml, policy).detected;
  }
  const std::pair<DetectionStatistic, Ratio> items[] = {{DetectionStatistic::Accuracy, point.accuracy},
                                                        {DetectionStatistic::Precision, point.precision},
                                                        {DetectionStatistic::Recall, point.recall},
                                                        {DetectionStatistic::F1, point.f1}};
  for (const auto& [stat, value] : items) {
    DetectionEntry e{std::string(to_string(stat)), value, std::nullopt, std::nullopt, 0};
    const auto b = bootstrap_detection_ci(pred, ref, stat, cfg);
    e.n_valid_resamples = b.n_valid;
    if (b.ci) {
      e.ci_lo = b.ci->lo;
      e.ci_hi = b.ci->hi;
    }
    s.metrics.push_back(std::move(e));
  }
  return s;
}

struct EvaluateOptions {
  R2Domain r2_domain = R2Domain::Raw;
  unsigned threads = 0;  // 0 = hardware concurrency; output does not depend on it
};

struct Provenance {
  std::string tool{kToolName};
  std::string version{kVersion};
  double threshold_ml = 50.0;
  std::size_t n_resamples = 10000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::string bootstrap_method{kBootstrapMethod};
  std::string percentile_method{kPercentileMethod};
  std::string r2_domain = "raw";
  double loa_multiplier = kLoaMultiplier;
  double spacing_rel_tolerance = kSpacingRelTolerance;
};

struct EvaluationReport {
  Provenance provenance;
  std::vector<CaseEvaluation> cases;
  std::vector<MetricAggregate> aggregates;  // dice, precision, recall, specificity
  std::optional<MedianIqr> pct_error;
  std::size_t pct_error_n = 0;
  DetectionSummary detection;
  std::optional<AgreementResult> agreement;  // volumes in liters
  std::optional<std::string> agreement_note;
  std::vector<BlandAltmanPoint> bland_altman_points;

  bool has_failures() const {
    return std::any_of(cases.begin(), cases.end(), [](const CaseEvaluation& c) { return !c.ok(); });
  }
};

/// Aggregates already-evaluated cases; run_evaluate is this plus file loading.
inline EvaluationReport build_report(std::vector<CaseEvaluation> cases, const DetectionPolicy& policy,
                                     const BootstrapConfig& cfg, const EvaluateOptions& opts = {}) {
  policy.validate();
  cfg.validate();
  EvaluationReport rep;
  rep.provenance.threshold_ml = policy.threshold_ml;
  rep.provenance.n_resamples = cfg.n_resamples;
  rep.provenance.alpha = cfg.alpha;
  rep.provenance.seed = cfg.seed;
  rep.provenance.r2_domain = opts.r2_domain == R2Domain::Log ? "log" : "raw";
  rep.cases = std::move(cases);

  std::vector<Ratio> dice, precision, recall, specificity;
  std::vector<double> pct, pred_l, ref_l;
  std::vector<CaseRecord> records;
  for (const auto& c : rep.cases) {
    if (!c.ok()) continue;
    records.push_back(c.record());
    if (!c.included()) continue;
    dice.push_back(c.metrics->dice);
    precision.push_back(c.metrics->precision);
    recall.push_back(c.metrics->recall);
    specificity.push_back(c.metrics->specificity);
    pct.push_back(*c.pct_error);
    pred_l.push_back(c.pred->volume_ml / 1000.0);
    ref_l.push_back(c.ref->volume_ml / 1000.0);
  }

  rep.aggregates.push_back(aggregate_metric("dice", dice, cfg));
  rep.aggregates.push_back(aggregate_metric("precision", precision, cfg));
  rep.aggregates.push_back(aggregate_metric("recall", recall, cfg));
  rep.aggregates.push_back(aggregate_metric("specificity", specificity, cfg));
  rep.pct_error_n = pct.size();
  if (!pct.empty()) rep.pct_error = median_iqr(pct);
  rep.detection = summarize_detection(records, policy, cfg);

  try {
    rep.agreement = agreement(pred_l, ref_l, opts.r2_domain);
    rep.bland_altman_points = bland_altman(pred_l, ref_l).points;
  } catch (const Error& e) {
    rep.agreement_note = e.what();
  }
  return rep;
}

inline EvaluationReport run_evaluate(const Manifest& manifest, const DetectionPolicy& policy,
                                     const BootstrapConfig& cfg, const EvaluateOptions& opts = {}) {
  require(!manifest.rows.empty(), Errc::ManifestError, "manifest has no cases");
  for (const auto& row : manifest.rows) {
    require(row.ref_mask_path.has_value(), Errc::ManifestError,
            "evaluation needs ref_mask_path for every case (missing for " + row.case_id + ")");
  }
  policy.validate();
  cfg.validate();

  std::vector<CaseEvaluation> cases(manifest.rows.size());
  auto work = [&](std::size_t i) {
    const auto& row = manifest.rows[i];
    try {
      if (row.ct_path) {
        require(std::filesystem::exists(*row.ct_path), Errc::IoFailure, "missing CT " + row.ct_path->string());
      }
      const auto pred = read_mask(row.pred_mask_path);
      const auto ref = read_mask(*row.ref_mask_path);
      cases[i] = evaluate_case(row.case_id, pred, ref, policy);
    } catch (const std::exception& e) {
      cases[i] = CaseEvaluation{};
      cases[i].case_id = row.case_id;
      cases[i].error = e.what();
    }
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cases.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < cases.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < cases.size(); i += threads) work(i);
      });
    }
  }
  return build_report(std::move(cases), policy, cfg, opts);
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json volume_json(const VolumeResult& v) {
  return Json{{"voxel_count", v.voxel_count},
              {"volume_ml", v.volume_ml},
              {"detected", v.detected},
              {"category", std::string(to_string(v.category))}};
}

}  // namespace detail

inline Json to_json(const VolumeResult& v) { return detail::volume_json(v); }

inline Json to_json(const PocketReport& p) {
  return Json{{"n_components", p.n_components},
              {"component_voxels", p.component_voxels},
              {"component_volumes_ml", p.component_volumes_ml},
              {"largest_fraction", detail::opt_json(p.largest_fraction)}};
}

inline Json to_json(const ConfusionMatrix& m) {
  return Json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tn", m.tn}};
}

inline Json to_json(const DetectionSummary& s, const BootstrapConfig& cfg) {
  Json metrics = Json::object();
  for (const auto& e : s.metrics) {
    metrics[e.metric] = Json{{"value", detail::opt_json(e.value)},
                             {"ci_lo", detail::opt_json(e.ci_lo)},
                             {"ci_hi", detail::opt_json(e.ci_hi)},
                             {"n_valid_resamples", e.n_valid_resamples},
                             {"method", std::string(kBootstrapMethod)},
                             {"n_resamples", cfg.n_resamples},
                             {"seed", cfg.seed}};
  }
  return Json{{"confusion", to_json(s.confusion)}, {"metrics", std::move(metrics)}};
}

inline Json to_json(const EvaluationReport& r) {
  const auto& p = r.provenance;
  const BootstrapConfig cfg{p.n_resamples, p.alpha, p.seed};
  Json prov{{"tool", p.tool},
            {"version", p.version},
            {"threshold_ml", p.threshold_ml},
            {"n_resamples", p.n_resamples},
            {"alpha", p.alpha},
            {"seed", p.seed},
            {"bootstrap_method", p.bootstrap_method},
            {"percentile_method", p.percentile_method},
            {"r2_domain", p.r2_domain},
            {"loa_multiplier", p.loa_multiplier},
            {"spacing_rel_tolerance", p.spacing_rel_tolerance},
            {"volume_error_denominator", "reference"}};

  Json cases = Json::array();
  Json failures = Json::array();
  for (const auto& c : r.cases) {
    Json jc{{"case_id", c.case_id}, {"status", c.ok() ? "ok" : "error"}};
    if (c.error) {
      jc["error"] = *c.error;
      failures.push_back(Json{{"case_id", c.case_id}, {"error", *c.error}});
    } else {
      jc["inclusion"] = std::string(to_string(c.inclusion));
      jc["pred"] = detail::volume_json(*c.pred);
      jc["ref"] = detail::volume_json(*c.ref);
      jc["overlap"] = Json{{"tp", c.counts->tp}, {"fp", c.counts->fp}, {"fn", c.counts->fn}, {"tn", c.counts->tn}};
      if (c.metrics) {
        jc["metrics"] = Json{{"dice", detail::opt_json(c.metrics->dice)},
                             {"precision", detail::opt_json(c.metrics->precision)},
                             {"recall", detail::opt_json(c.metrics->recall)},
                             {"specificity", detail::opt_json(c.metrics->specificity)}};
      } else {
        jc["metrics"] = nullptr;
      }
      jc["pct_error"] = detail::opt_json(c.pct_error);
    }
    jc["flags"] = c.flags();
    cases.push_back(std::move(jc));
  }

  Json aggregates = Json::array();
  for (const auto& a : r.aggregates) {
    aggregates.push_back(Json{{"metric", a.metric},
                              {"n", a.n},
                              {"n_skipped", a.n_skipped},
                              {"mean", detail::opt_json(a.mean)},
                              {"sd", detail::opt_json(a.sd)},
                              {"ci_lo", detail::opt_json(a.ci_lo)},
                              {"ci_hi", detail::opt_json(a.ci_hi)},
                              {"method", std::string(kBootstrapMethod)},
                              {"n_resamples", p.n_resamples},
                              {"seed", p.seed}});
  }

  Json pct = nullptr;
  if (r.pct_error) {
    pct = Json{{"n", r.pct_error_n}, {"median", r.pct_error->median}, {"q25", r.pct_error->q25}, {"q75", r.pct_error->q75}};
  }

  Json agreement = nullptr;
  if (r.agreement) {
    const auto& a = *r.agreement;
    agreement = Json{{"units", "L"},     {"r2", a.r2},           {"bias", a.bias},
                     {"sd_diff", a.sd_diff}, {"loa_lo", a.loa_lo}, {"loa_hi", a.loa_hi}};
  }

  Json out{{"provenance", std::move(prov)},
           {"cases", std::move(cases)},
           {"aggregates", std::move(aggregates)},
           {"pct_error", std::move(pct)},
           {"detection", to_json(r.detection, cfg)},
           {"agreement", std::move(agreement)}};
  if (r.agreement_note) out["agreement_note"] = *r.agreement_note;
  out["failures"] = std::move(failures);
  return out;
}

/// Per-case CSV in kMetricCsvColumns order. Undefined or excluded metrics are
/// empty cells; flags are ';'-separated.
inline std::string metrics_csv(const EvaluationReport& r) {
  std::string out = csv::join(csv::Row(kMetricCsvColumns.begin(), kMetricCsvColumns.end())) + "\n";
  for (const auto& c : r.cases) {
    std::string flags;
    for (const auto& f : c.flags()) flags += (flags.empty() ? "" : ";") + f;
    csv::Row row{c.case_id};
    auto metric = [&](Ratio OverlapMetrics::*field) {
      return c.metrics ? csv::format_optional((*c.metrics).*field) : std::string();
    };
    row.push_back(metric(&OverlapMetrics::dice));
    row.push_back(metric(&OverlapMetrics::precision));
    row.push_back(metric(&OverlapMetrics::recall));
    row.push_back(metric(&OverlapMetrics::specificity));
    row.push_back(c.pred ? csv::format_double(c.pred->volume_ml) : "");
    row.push_back(c.ref ? csv::format_double(c.ref->volume_ml) : "");
    row.push_back(csv::format_optional(c.pct_error));
    row.push_back(flags);
    out += csv::join(row) + "\n";
  }
  return out;
}

/// Plot data for the volume scatter (r²) figure: included cases, liters.
inline std::string r2_plot_csv(const EvaluationReport& r) {
  std::string out = "case_id,ref_l,pred_l\n";
  for (const auto& c : r.cases) {
    if (!c.included()) continue;
    out += csv::join({c.case_id, csv::format_double(c.ref->volume_ml / 1000.0),
                      csv::format_double(c.pred->volume_ml / 1000.0)}) + "\n";
  }
  return out;
}

/// Plot data for the Bland-Altman figure: per-case mean and difference plus
/// the bias and limits of agreement as constant columns.
inline std::string bland_altman_plot_csv(const EvaluationReport& r) {
  std::string out = "case_id,mean_l,diff_l,bias_l,loa_lo_l,loa_hi_l\n";
  if (!r.agreement) return out;
  std::size_t k = 0;
  for (const auto& c : r.cases) {
    if (!c.included()) continue;
    const auto& pt = r.bland_altman_points.at(k++);
    out += csv::join({c.case_id, csv::format_double(pt.mean), csv::format_double(pt.diff),
                      csv::format_double(r.agreement->bias), csv::format_double(r.agreement->loa_lo),
                      csv::format_double(r.agreement->loa_hi)}) + "\n";
  }
  return out;
}

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  fail(Errc::UnsupportedFormat, "unknown report format '" + std::string(s) + "' (expected json or csv)");
}

/// Canonical JSON text: two-space indent, insertion-ordered keys, trailing newline.
inline std::string canonical_json(const Json& j) { return j.dump(2) + "\n"; }

inline std::string emit_report(const EvaluationReport& r, ReportFormat format) {
  return format == ReportFormat::Json ? canonical_json(to_json(r)) : metrics_csv(r);
}

inline std::string emit_report(const EvaluationReport& r, std::string_view format) {
  return emit_report(r, parse_report_format(format));
}

}  // namespace ascvol
