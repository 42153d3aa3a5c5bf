// ascvol: command-line front end for fluid volumetry and its evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error (for `evaluate`, the
// partial report is still written).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ascvol/ascvol.hpp"

namespace fs = std::filesystem;
using ascvol::Json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ASCVOL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric ASCVOL_SEED\n";
    }
  }
  return 0;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  ascvol::require(static_cast<bool>(out), ascvol::Errc::IoFailure, "cannot write " + path.string());
  out << text;
  ascvol::require(static_cast<bool>(out), ascvol::Errc::IoFailure, "write failed on " + path.string());
}

void emit(const std::optional<fs::path>& path, const std::string& text) {
  if (path) write_text(*path, text);
  else std::cout << text;
}

ascvol::csv::Table load_table(const fs::path& path) {
  std::ifstream in(path);
  ascvol::require(static_cast<bool>(in), ascvol::Errc::IoFailure, "cannot open " + path.string());
  return ascvol::csv::read_table(in);
}

std::size_t need_column(const ascvol::csv::Table& t, const std::string& name, const fs::path& path) {
  const auto c = t.column(name);
  ascvol::require(c.has_value(), ascvol::Errc::ManifestError, path.string() + " lacks column " + name);
  return *c;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

struct CommonOptions {
  double threshold_ml = 50.0;
  std::size_t bootstrap = 10000;
  double alpha = 0.05;
  std::uint64_t seed = default_seed();
  unsigned threads = 0;

  ascvol::DetectionPolicy policy() const { return {threshold_ml}; }
  ascvol::BootstrapConfig bootstrap_config() const {
    return {bootstrap, alpha, seed, threads ? threads : std::max(1u, std::thread::hardware_concurrency())};
  }
};

void add_threshold(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--threshold-ml", o.threshold_ml, "Detection threshold in mL")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_bootstrap(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--bootstrap", o.bootstrap, "Bootstrap resamples")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Two-sided significance level for CIs")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Bootstrap seed (default: $ASCVOL_SEED or 0)")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores); output does not depend on it");
}

// quantify ------------------------------------------------------------------

int run_quantify(const fs::path& mask_path, const CommonOptions& o, int connectivity) {
  const auto mask = ascvol::read_mask(mask_path);
  const auto v = ascvol::quantify(mask, o.policy());
  const auto pockets = ascvol::connected_pockets(mask, ascvol::connectivity_from_int(connectivity));
  Json out{{"path", mask_path.string()},
           {"threshold_ml", o.threshold_ml},
           {"voxel_count", v.voxel_count},
           {"volume_ml", v.volume_ml},
           {"detected", v.detected},
           {"category", std::string(ascvol::to_string(v.category))},
           {"connectivity", connectivity},
           {"pockets", ascvol::to_json(pockets)}};
  std::cout << out.dump() << "\n";
  return 0;
}

// evaluate ------------------------------------------------------------------

struct EvaluateArgs {
  fs::path manifest;
  std::string format = "json";
  std::optional<fs::path> out;
  std::optional<fs::path> json_out;
  std::optional<fs::path> csv_out;
  std::optional<fs::path> plot_dir;
  bool log_domain_r2 = false;
};

int run_evaluate(const EvaluateArgs& a, const CommonOptions& o) {
  const auto format = ascvol::parse_report_format(a.format);
  const auto manifest = ascvol::Manifest::load(a.manifest);
  ascvol::EvaluateOptions opts;
  opts.r2_domain = a.log_domain_r2 ? ascvol::R2Domain::Log : ascvol::R2Domain::Raw;
  opts.threads = o.threads;
  const auto report = ascvol::run_evaluate(manifest, o.policy(), o.bootstrap_config(), opts);

  emit(a.out, ascvol::emit_report(report, format));
  if (a.json_out) write_text(*a.json_out, ascvol::emit_report(report, ascvol::ReportFormat::Json));
  if (a.csv_out) write_text(*a.csv_out, ascvol::emit_report(report, ascvol::ReportFormat::Csv));
  if (a.plot_dir) {
    fs::create_directories(*a.plot_dir);
    write_text(*a.plot_dir / "r2_scatter.csv", ascvol::r2_plot_csv(report));
    write_text(*a.plot_dir / "bland_altman.csv", ascvol::bland_altman_plot_csv(report));
  }
  if (report.has_failures()) {
    for (const auto& c : report.cases) {
      if (!c.ok()) std::cerr << "case " << c.case_id << " failed: " << *c.error << "\n";
    }
    return kExitData;
  }
  return 0;
}

// detect --------------------------------------------------------------------

int run_detect(const fs::path& cases_csv, const CommonOptions& o, const std::optional<fs::path>& out) {
  const auto table = load_table(cases_csv);
  const auto id = need_column(table, "case_id", cases_csv);
  const auto pred = need_column(table, "pred_ml", cases_csv);
  const auto ref = need_column(table, "ref_ml", cases_csv);
  std::vector<ascvol::CaseRecord> cases;
  for (const auto& row : table.rows) {
    ascvol::require(row.size() > std::max({id, pred, ref}), ascvol::Errc::ManifestError, "short row in " + cases_csv.string());
    cases.push_back({row[id], ascvol::csv::parse_double(row[pred], "pred_ml"), ascvol::csv::parse_double(row[ref], "ref_ml")});
  }
  const auto cfg = o.bootstrap_config();
  const auto summary = ascvol::summarize_detection(cases, o.policy(), cfg);
  Json j{{"threshold_ml", o.threshold_ml}, {"n_cases", cases.size()}};
  const Json detection = ascvol::to_json(summary, cfg);
  for (const auto& [k, v] : detection.items()) j[k] = v;
  emit(out, ascvol::canonical_json(j));
  return 0;
}

// stats ---------------------------------------------------------------------

std::vector<double> column_values(const ascvol::csv::Table& t, std::size_t col, const std::string& name, double scale) {
  std::vector<double> v;
  for (const auto& row : t.rows) {
    ascvol::require(col < row.size(), ascvol::Errc::ManifestError, "short row");
    v.push_back(ascvol::csv::parse_double(row[col], name) * scale);
  }
  return v;
}

/// Reads paired volumes from columns pred_l/ref_l, or pred_ml/ref_ml converted to liters.
std::pair<std::vector<double>, std::vector<double>> load_pairs(const fs::path& path) {
  const auto t = load_table(path);
  if (t.column("pred_l") && t.column("ref_l")) {
    return {column_values(t, *t.column("pred_l"), "pred_l", 1.0), column_values(t, *t.column("ref_l"), "ref_l", 1.0)};
  }
  const auto p = need_column(t, "pred_ml", path);
  const auto r = need_column(t, "ref_ml", path);
  return {column_values(t, p, "pred_ml", 1e-3), column_values(t, r, "ref_ml", 1e-3)};
}

int run_agreement(const fs::path& pairs, bool log_domain, const std::optional<fs::path>& plot_csv) {
  const auto [pred, ref] = load_pairs(pairs);
  const auto domain = log_domain ? ascvol::R2Domain::Log : ascvol::R2Domain::Raw;
  const auto a = ascvol::agreement(pred, ref, domain);
  Json j{{"units", "L"},           {"n", pred.size()},     {"r2_domain", log_domain ? "log" : "raw"},
         {"r2", a.r2},             {"bias", a.bias},       {"sd_diff", a.sd_diff},
         {"loa_lo", a.loa_lo},     {"loa_hi", a.loa_hi},   {"loa_multiplier", ascvol::kLoaMultiplier}};
  std::cout << ascvol::canonical_json(j);
  if (plot_csv) {
    std::string text = "mean_l,diff_l\n";
    for (const auto& pt : ascvol::bland_altman(pred, ref).points) {
      text += ascvol::csv::format_double(pt.mean) + "," + ascvol::csv::format_double(pt.diff) + "\n";
    }
    write_text(*plot_csv, text);
  }
  return 0;
}

int run_summary(const fs::path& path, const std::string& column, const CommonOptions& o) {
  const auto t = load_table(path);
  const auto values = column_values(t, need_column(t, column, path), column, 1.0);
  const auto cfg = o.bootstrap_config();
  const auto m = ascvol::mean_sd_ci(values, cfg);
  const auto q = ascvol::median_iqr(values);
  Json j{{"metric", column},
         {"n", values.size()},
         {"mean", m.mean},
         {"sd", m.sd},
         {"ci_lo", m.ci_lo},
         {"ci_hi", m.ci_hi},
         {"median", q.median},
         {"q25", q.q25},
         {"q75", q.q75},
         {"method", std::string(ascvol::kBootstrapMethod)},
         {"n_resamples", cfg.n_resamples},
         {"seed", cfg.seed}};
  std::cout << ascvol::canonical_json(j);
  return 0;
}

// phantom -------------------------------------------------------------------

struct PhantomArgs {
  fs::path spec;
  std::optional<fs::path> ct, truth, pred, prob;
  double band_lo = -20.0;
  double band_hi = 30.0;
  bool restrict_to_body = true;
};

int run_phantom(const PhantomArgs& a, const CommonOptions& o) {
  std::ifstream in(a.spec);
  ascvol::require(static_cast<bool>(in), ascvol::Errc::IoFailure, "cannot open " + a.spec.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    ascvol::fail(ascvol::Errc::InvalidParameter, std::string("phantom spec: ") + e.what());
  }
  const auto spec = j.get<ascvol::PhantomSpec>();
  const auto ph = ascvol::generate_phantom(spec);
  if (a.ct) ascvol::write_volume(ph.ct, *a.ct);
  if (a.truth) ascvol::write_volume(ph.truth.truth_mask, *a.truth);

  Json out{{"analytic_volume_ml", ph.truth.analytic_volume_ml},
           {"voxelized_volume_ml", ph.truth.voxelized_volume_ml},
           {"truth", ascvol::to_json(ascvol::quantify(ph.truth.truth_mask, o.policy()))}};
  if (a.pred || a.prob) {
    const ascvol::HuBand band{a.band_lo, a.band_hi};
    const auto seg = a.restrict_to_body ? ascvol::baseline_segment(ph.ct, band, ph.body_mask)
                                        : ascvol::baseline_segment(ph.ct, band);
    if (a.pred) ascvol::write_volume(seg.mask, *a.pred);
    if (a.prob) ascvol::write_volume(seg.prob, *a.prob);
    out["baseline"] = ascvol::to_json(ascvol::quantify(seg.mask, o.policy()));
  }
  std::cout << ascvol::canonical_json(out);
  return 0;
}

// select --------------------------------------------------------------------

struct SelectArgs {
  fs::path scores;  // CSV: case_id, prob_path
  fs::path pool;
  std::size_t k = 0;
  std::optional<fs::path> init_labeled;
  std::string aggregation = "entropy";
  std::optional<std::string> retrain_cmd;
  std::optional<fs::path> out;
  bool dry_run = false;
};

std::set<std::string> read_id_list(const fs::path& path) {
  std::ifstream in(path);
  ascvol::require(static_cast<bool>(in), ascvol::Errc::IoFailure, "cannot open " + path.string());
  std::set<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.insert(line);
  }
  return ids;
}

int run_select(const SelectArgs& a) {
  ascvol::require(a.aggregation == "entropy" || a.aggregation == "max-prob", ascvol::Errc::InvalidParameter,
                  "aggregation must be entropy or max-prob");
  const auto agg = a.aggregation == "entropy" ? ascvol::UncertaintyAggregation::MeanEntropy
                                              : ascvol::UncertaintyAggregation::OneMinusMeanMaxProb;
  const auto table = load_table(a.scores);
  const auto id_col = need_column(table, "case_id", a.scores);
  const auto prob_col = need_column(table, "prob_path", a.scores);
  const auto base = a.scores.parent_path();

  ascvol::PoolState pool;
  std::set<std::string> all_ids;
  for (const auto& row : table.rows) all_ids.insert(row.at(id_col));
  if (a.init_labeled) {
    auto labeled = read_id_list(*a.init_labeled);
    std::set<std::string> unlabeled;
    for (const auto& id : all_ids) {
      if (!labeled.contains(id)) unlabeled.insert(id);
    }
    pool = ascvol::PoolState::initial(std::move(labeled), std::move(unlabeled));
  } else {
    std::ifstream in(a.pool);
    ascvol::require(static_cast<bool>(in), ascvol::Errc::IoFailure,
                    "cannot open pool " + a.pool.string() + " (use --init-labeled to create one)");
    pool = Json::parse(in).get<ascvol::PoolState>();
  }

  std::vector<ascvol::UncertaintyScore> scores;
  for (const auto& row : table.rows) {
    const auto& id = row.at(id_col);
    if (!pool.unlabeled.contains(id)) continue;
    const auto prob = ascvol::read_volume<float>(resolve(base, row.at(prob_col)), ascvol::GridKind::Probability);
    scores.push_back(ascvol::uncertainty_score(id, prob, agg));
  }
  const auto selected = ascvol::rank_for_annotation(scores, a.k);
  std::string listing;
  for (const auto& id : selected) listing += id + "\n";
  emit(a.out, listing);

  if (a.dry_run) return 0;
  const auto next = ascvol::advance_round(pool, selected);
  write_text(a.pool, ascvol::canonical_json(Json(next)));
  if (a.retrain_cmd) {
    const int rc = std::system(a.retrain_cmd->c_str());
    if (rc != 0) {
      std::cerr << "retrain command exited with status " << rc << "\n";
      return kExitData;
    }
  }
  return 0;
}

// norm-stats ----------------------------------------------------------------

int run_norm_stats(const fs::path& manifest, const std::optional<fs::path>& out) {
  const auto table = load_table(manifest);
  const auto ct_col = need_column(table, "ct_path", manifest);
  const auto fg_col = table.column("fg_mask_path");
  const auto base = manifest.parent_path();
  ascvol::DatasetStatsAccumulator acc;
  for (const auto& row : table.rows) {
    const auto ct = ascvol::read_volume<float>(resolve(base, row.at(ct_col)), ascvol::GridKind::Intensity);
    if (fg_col && *fg_col < row.size() && !row[*fg_col].empty()) {
      acc.add(ct, ascvol::read_mask(resolve(base, row[*fg_col])));
    } else {
      acc.add(ct);
    }
  }
  emit(out, ascvol::canonical_json(Json(acc.result())));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fluid volumetry from CT segmentation masks, with evaluation statistics"};
  app.set_version_flag("--version", std::string(ascvol::kVersion));
  app.require_subcommand(1);

  CommonOptions common;

  fs::path quantify_mask;
  int connectivity = 26;
  auto* quantify = app.add_subcommand("quantify", "Volume, detection call and connected pockets of one mask");
  quantify->add_option("mask", quantify_mask, "Binary mask (NIfTI-1)")->required();
  add_threshold(quantify, common);
  quantify->add_option("--connectivity", connectivity, "Pocket connectivity (6 or 26)")
      ->check(CLI::IsMember({6, 26}))
      ->capture_default_str();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Batch evaluation of predicted vs reference masks");
  evaluate->add_option("manifest", eval_args.manifest, "Manifest CSV")->required();
  add_threshold(evaluate, common);
  add_bootstrap(evaluate, common);
  evaluate->add_option("--format", eval_args.format, "Output format for stdout/--out: json or csv")->capture_default_str();
  evaluate->add_option("--out", eval_args.out, "Write the report here instead of stdout");
  evaluate->add_option("--json-out", eval_args.json_out, "Also write the JSON report here");
  evaluate->add_option("--csv-out", eval_args.csv_out, "Also write the per-case CSV here");
  evaluate->add_option("--plot-dir", eval_args.plot_dir, "Write r² and Bland-Altman plot data here");
  evaluate->add_flag("--log-domain-r2", eval_args.log_domain_r2, "Compute r² on log volumes");

  fs::path detect_csv;
  std::optional<fs::path> detect_out;
  auto* detect = app.add_subcommand("detect", "Detection confusion matrix and metrics from case volumes");
  detect->add_option("cases", detect_csv, "CSV with case_id,pred_ml,ref_ml")->required();
  add_threshold(detect, common);
  add_bootstrap(detect, common);
  detect->add_option("--out", detect_out, "Write JSON here instead of stdout");

  auto* stats = app.add_subcommand("stats", "Agreement, summary statistics and power analysis");
  stats->require_subcommand(1);
  fs::path agreement_csv;
  bool agreement_log = false;
  std::optional<fs::path> agreement_plot;
  auto* agreement = stats->add_subcommand("agreement", "r² and Bland-Altman bias/limits of agreement");
  agreement->add_option("pairs", agreement_csv, "CSV with pred_l,ref_l or pred_ml,ref_ml")->required();
  agreement->add_flag("--log-domain-r2", agreement_log, "Compute r² on log volumes");
  agreement->add_option("--plot-csv", agreement_plot, "Write Bland-Altman plot data here");
  fs::path summary_csv;
  std::string summary_column;
  auto* summary = stats->add_subcommand("summary", "Mean ± SD with bootstrap CI, median and IQR of a column");
  summary->add_option("table", summary_csv, "CSV file")->required();
  summary->add_option("--column", summary_column, "Column to summarize")->required();
  add_bootstrap(summary, common);
  double effect_size = 0.5, power_alpha = 0.05, power = 0.8;
  auto* power_cmd = stats->add_subcommand("power", "Normal-approximation sample size");
  power_cmd->add_option("--effect-size", effect_size, "Cohen's d")->capture_default_str();
  power_cmd->add_option("--alpha", power_alpha, "Two-sided significance level")->capture_default_str();
  power_cmd->add_option("--power", power, "Target power")->capture_default_str();

  PhantomArgs phantom_args;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic CT phantom with known fluid volume");
  phantom->add_option("spec", phantom_args.spec, "Phantom spec JSON")->required();
  phantom->add_option("--ct", phantom_args.ct, "Write the CT volume here");
  phantom->add_option("--truth", phantom_args.truth, "Write the truth mask here");
  phantom->add_option("--pred", phantom_args.pred, "Write the baseline segmentation mask here");
  phantom->add_option("--prob", phantom_args.prob, "Write the baseline probability map here");
  phantom->add_option("--band-lo", phantom_args.band_lo, "Baseline HU band lower bound")->capture_default_str();
  phantom->add_option("--band-hi", phantom_args.band_hi, "Baseline HU band upper bound")->capture_default_str();
  add_threshold(phantom, common);

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "Pick the next scans to annotate by uncertainty");
  select->add_option("--scores", select_args.scores, "CSV with case_id,prob_path")->required();
  select->add_option("--pool", select_args.pool, "Pool state JSON (read and updated)")->required();
  select->add_option("--k", select_args.k, "Number of scans to select")->required();
  select->add_option("--init-labeled", select_args.init_labeled,
                     "Start a new pool: file of already-labeled ids; all other ids are unlabeled");
  select->add_option("--aggregation", select_args.aggregation, "entropy or max-prob")->capture_default_str();
  select->add_option("--retrain-cmd", select_args.retrain_cmd, "Command to run after the pool is updated");
  select->add_option("--out", select_args.out, "Write selected ids here instead of stdout");
  select->add_flag("--dry-run", select_args.dry_run, "Print the selection without updating the pool");

  fs::path norm_manifest;
  std::optional<fs::path> norm_out;
  auto* norm = app.add_subcommand("norm-stats", "Dataset-wide population mean/sd for z-score normalization");
  norm->add_option("manifest", norm_manifest, "CSV with ct_path and optional fg_mask_path")->required();
  norm->add_option("--out", norm_out, "Write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*quantify) return run_quantify(quantify_mask, common, connectivity);
    if (*evaluate) return run_evaluate(eval_args, common);
    if (*detect) return run_detect(detect_csv, common, detect_out);
    if (*agreement) return run_agreement(agreement_csv, agreement_log, agreement_plot);
    if (*summary) return run_summary(summary_csv, summary_column, common);
    if (*power_cmd) {
      const auto n = ascvol::power_sample_size(effect_size, power_alpha, power);
      std::cout << ascvol::canonical_json(
          Json{{"effect_size", effect_size}, {"alpha", power_alpha}, {"power", power}, {"n", n}});
      return 0;
    }
    if (*phantom) return run_phantom(phantom_args, common);
    if (*select) return run_select(select_args);
    if (*norm) return run_norm_stats(norm_manifest, norm_out);
  } catch (const ascvol::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ascvol::Errc::UnsupportedFormat ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
