#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace dcoh {

// All rank-based metrics use the pessimistic tie rule: among candidates with
// equal predicted scores, more relevant candidates are placed after less
// relevant ones.

/// Predicted order (candidate indices, best first) under the pessimistic
/// tie rule. Remaining ties (equal score and relevance) keep input order.
std::vector<std::size_t> rank_order(std::span<const double> scores,
                                    std::span<const double> relevance);

/// Relevance values listed in predicted order.
using RankedList = std::vector<double>;

RankedList ranked_list(std::span<const double> scores, std::span<const double> relevance);

/// Fraction of negatives scored strictly below the positive.
double pairwise_accuracy(double pos_score, std::span<const double> neg_scores);

/// 1 / rank of the first relevant (> 0) entry. Throws std::invalid_argument
/// when nothing is relevant.
double mrr(const RankedList& ranked);

/// 1 when a relevant entry is within the first k.
double recall_at_k(const RankedList& ranked, std::size_t k);

/// Linear gain uses the rating itself; exponential uses 2^rating - 1.
enum class GainMode { Linear, Exponential };
GainMode parse_gain_mode(std::string_view s);

/// nDCG: sum gain_i / log2(i + 1) over the predicted order, divided by the
/// same sum over gains sorted descending.
double ndcg(const RankedList& ranked_gains, GainMode mode = GainMode::Linear);

/// 1 for candidates whose rating equals the instance maximum, else 0.
std::vector<double> dynamic_relevance(std::span<const double> ratings);

struct PairCount {
  std::size_t correct = 0;
  std::size_t total = 0;
};

/// Pairs of candidates with different ratings; correct when the higher
/// rated candidate has a strictly higher score.
PairCount rated_pair_accuracy(std::span<const double> scores, std::span<const double> ratings);

enum class BaselineMetric { Accuracy, Mrr, R1, R2, Ndcg };
BaselineMetric parse_baseline_metric(std::string_view s);
std::string to_string(BaselineMetric m);

struct BaselineEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  std::optional<double> closed_form;
};

/// Monte Carlo expectation of a metric under uniformly random orderings of
/// candidates with the given relevance (gains for nDCG; for accuracy,
/// entries > 0 are positives scored against every zero entry with random
/// continuous scores).
BaselineEstimate random_baseline(std::span<const double> relevance, BaselineMetric metric,
                                 std::size_t trials, std::uint64_t seed);

/// sum_{k=1..n} 1/k / n: expected reciprocal rank of a single relevant item.
double harmonic_mrr(std::size_t n);

/// Quadratic-weighted Cohen's kappa over ordinal categories
/// [min_category, max_category].
double quadratic_weighted_kappa(std::span<const int> a, std::span<const int> b,
                                int min_category = 1, int max_category = 3);

double pearson(std::span<const double> x, std::span<const double> y);

/// items x raters; std::nullopt marks a missing rating.
using RatingMatrix = std::vector<std::vector<std::optional<int>>>;

struct LeaveOneOut {
  std::vector<double> per_rater;
  double mean = 0.0;
};

/// Pearson correlation of each rater with the item-wise mean of all other
/// raters, over items both sides rated.
LeaveOneOut leave_one_out_correlation(const RatingMatrix& m);

/// Aggregated metric across runs.
struct MetricSummary {
  std::string name;
  std::vector<double> per_run;  // one value per seed/model
  std::size_t instances = 0;

  double mean() const;
};

nlohmann::json metrics_json(const std::vector<MetricSummary>& metrics);
std::string metrics_tsv(const std::vector<MetricSummary>& metrics);

}  // namespace dcoh
