#pragma once

// Uncertainty-driven selection of scans for the next annotation round and
// the labeled/unlabeled pool bookkeeping across rounds. Retraining happens
// outside this module.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ascvol/error.hpp"
#include "ascvol/grid.hpp"
#include "ascvol/numeric.hpp"
#include "json.hpp"

namespace ascvol {

/// -[p ln p + (1-p) ln(1-p)] with 0·ln 0 = 0.
inline double binary_entropy(double p) noexcept {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

enum class UncertaintyAggregation {
  MeanEntropy,          // mean per-voxel binary entropy, in [0, ln 2]
  OneMinusMeanMaxProb,  // 1 - mean(max(p, 1-p)), in [0, 0.5]
};

constexpr std::string_view to_string(UncertaintyAggregation a) noexcept {
  return a == UncertaintyAggregation::MeanEntropy ? "mean-entropy" : "one-minus-mean-max-prob";
}

struct UncertaintyScore {
  std::string scan_id;
  double score = 0.0;
};

inline double uncertainty_of(std::span<const float> probs,
                             UncertaintyAggregation agg = UncertaintyAggregation::MeanEntropy) {
  require(!probs.empty(), Errc::EmptyInput, "uncertainty of an empty probability map");
  const double sum = pairwise_sum(probs, [agg](std::size_t, float pf) {
    const double p = pf;
    return agg == UncertaintyAggregation::MeanEntropy ? binary_entropy(p) : 1.0 - std::max(p, 1.0 - p);
  });
  return std::max(0.0, sum / static_cast<double>(probs.size()));
}

inline UncertaintyScore uncertainty_score(std::string scan_id, const ProbabilityMap& prob,
                                          UncertaintyAggregation agg = UncertaintyAggregation::MeanEntropy) {
  return {std::move(scan_id), uncertainty_of(prob.values(), agg)};
}

/// Top-k ids by descending score; ties go to the lexicographically smaller id.
inline std::vector<std::string> rank_for_annotation(std::span<const UncertaintyScore> scores, std::size_t k) {
  require(k <= scores.size(), Errc::KTooLarge,
          "k = " + std::to_string(k) + " exceeds the " + std::to_string(scores.size()) + " scored scans");
  std::vector<const UncertaintyScore*> order;
  order.reserve(scores.size());
  for (const auto& s : scores) order.push_back(&s);
  auto better = [](const UncertaintyScore* a, const UncertaintyScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->scan_id < b->scan_id;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), better);
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(order[i]->scan_id);
  return out;
}

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::string> selected;

  friend bool operator==(const RoundRecord&, const RoundRecord&) = default;
};

struct PoolState {
  std::set<std::string> labeled;
  std::set<std::string> unlabeled;
  std::size_t round = 0;
  std::vector<RoundRecord> history;

  /// Builds the round-0 pool; the two sets must be disjoint.
  static PoolState initial(std::set<std::string> labeled, std::set<std::string> unlabeled) {
    for (const auto& id : labeled) {
      require(!unlabeled.contains(id), Errc::AlreadyLabeled, "id " + id + " is both labeled and unlabeled");
    }
    return {std::move(labeled), std::move(unlabeled), 0, {}};
  }

  std::size_t total() const noexcept { return labeled.size() + unlabeled.size(); }

  /// Scans annotated after the seed batch, for budget accounting.
  std::size_t annotated_in_rounds() const noexcept {
    std::size_t n = 0;
    for (const auto& r : history) n += r.selected.size();
    return n;
  }

  friend bool operator==(const PoolState&, const PoolState&) = default;
};

/// Moves `selected` from unlabeled to labeled and records the round.
inline PoolState advance_round(const PoolState& pool, std::span<const std::string> selected) {
  PoolState next = pool;
  std::set<std::string> seen;
  for (const auto& id : selected) {
    require(!pool.labeled.contains(id) && !seen.contains(id), Errc::AlreadyLabeled, "id " + id + " is already labeled");
    require(pool.unlabeled.contains(id), Errc::UnknownId, "id " + id + " is not in the pool");
    seen.insert(id);
    next.unlabeled.erase(id);
    next.labeled.insert(id);
  }
  next.round = pool.round + 1;
  next.history.push_back({next.round, {selected.begin(), selected.end()}});
  return next;
}

/// Scores restricted to the unlabeled part of the pool.
inline std::vector<UncertaintyScore> unlabeled_scores(const PoolState& pool, std::span<const UncertaintyScore> scores) {
  std::vector<UncertaintyScore> out;
  for (const auto& s : scores) {
    if (pool.unlabeled.contains(s.scan_id)) out.push_back(s);
  }
  return out;
}

// {"round": 1, "labeled": [...], "unlabeled": [...],
//  "history": [{"round": 1, "selected": [...]}]}

inline void to_json(nlohmann::ordered_json& j, const PoolState& p) {
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& r : p.history) hist.push_back({{"round", r.round}, {"selected", r.selected}});
  j = nlohmann::ordered_json{{"round", p.round}, {"labeled", p.labeled}, {"unlabeled", p.unlabeled},
                             {"history", std::move(hist)}};
}

inline void from_json(const nlohmann::ordered_json& j, PoolState& p) {
  p = PoolState::initial(j.at("labeled").get<std::set<std::string>>(),
                         j.at("unlabeled").get<std::set<std::string>>());
  p.round = j.at("round").get<std::size_t>();
  for (const auto& r : j.value("history", nlohmann::ordered_json::array())) {
    p.history.push_back({r.at("round").get<std::size_t>(), r.at("selected").get<std::vector<std::string>>()});
  }
}

}  // namespace ascvol
