#include "dcoh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dcoh/common.hpp"

namespace dcoh {

std::vector<std::size_t> rank_order(std::span<const double> scores,
                                    std::span<const double> relevance) {
  if (scores.size() != relevance.size())
    throw std::invalid_argument("rank_order: scores/relevance size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return relevance[a] < relevance[b];
  });
  return order;
}

RankedList ranked_list(std::span<const double> scores, std::span<const double> relevance) {
  RankedList out;
  for (auto i : rank_order(scores, relevance)) out.push_back(relevance[i]);
  return out;
}

double pairwise_accuracy(double pos_score, std::span<const double> neg_scores) {
  if (neg_scores.empty()) throw std::invalid_argument("pairwise_accuracy: no negatives");
  std::size_t wins = 0;
  for (double s : neg_scores) wins += pos_score > s;
  return static_cast<double>(wins) / static_cast<double>(neg_scores.size());
}

double mrr(const RankedList& ranked) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (ranked[i] > 0.0) return 1.0 / static_cast<double>(i + 1);
  throw std::invalid_argument("mrr: no relevant candidate");
}

double recall_at_k(const RankedList& ranked, std::size_t k) {
  if (k < 1 || k > ranked.size()) throw std::invalid_argument("recall_at_k: k out of range");
  for (std::size_t i = 0; i < k; ++i)
    if (ranked[i] > 0.0) return 1.0;
  return 0.0;
}

namespace {

double dcg(std::span<const double> gains) {
  double s = 0.0;
  for (std::size_t i = 0; i < gains.size(); ++i)
    s += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  return s;
}

}  // namespace

GainMode parse_gain_mode(std::string_view s) {
  if (s == "linear") return GainMode::Linear;
  if (s == "exponential") return GainMode::Exponential;
  throw std::invalid_argument("unknown gain '" + std::string(s) + "' (expected linear|exponential)");
}

double ndcg(const RankedList& ranked_gains, GainMode mode) {
  if (mode == GainMode::Exponential) {
    RankedList g(ranked_gains);
    for (auto& x : g) x = std::exp2(x) - 1.0;
    return ndcg(g, GainMode::Linear);
  }
  std::vector<double> ideal(ranked_gains);
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal);
  if (!(idcg > 0.0)) throw std::invalid_argument("ndcg: all gains are zero");
  return dcg(ranked_gains) / idcg;
}

std::vector<double> dynamic_relevance(std::span<const double> ratings) {
  if (ratings.empty()) return {};
  const double best = *std::max_element(ratings.begin(), ratings.end());
  std::vector<double> rel;
  for (double r : ratings) rel.push_back(r == best ? 1.0 : 0.0);
  return rel;
}

PairCount rated_pair_accuracy(std::span<const double> scores, std::span<const double> ratings) {
  if (scores.size() != ratings.size())
    throw std::invalid_argument("rated_pair_accuracy: size mismatch");
  PairCount pc;
  for (std::size_t i = 0; i < scores.size(); ++i)
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      if (ratings[i] == ratings[j]) continue;
      ++pc.total;
      const bool i_better = ratings[i] > ratings[j];
      pc.correct += i_better ? scores[i] > scores[j] : scores[j] > scores[i];
    }
  return pc;
}

BaselineMetric parse_baseline_metric(std::string_view s) {
  if (s == "accuracy") return BaselineMetric::Accuracy;
  if (s == "mrr") return BaselineMetric::Mrr;
  if (s == "r1") return BaselineMetric::R1;
  if (s == "r2") return BaselineMetric::R2;
  if (s == "ndcg") return BaselineMetric::Ndcg;
  throw DataError("unknown metric '" + std::string(s) + "' (expected accuracy|mrr|r1|r2|ndcg)");
}

std::string to_string(BaselineMetric m) {
  switch (m) {
    case BaselineMetric::Accuracy: return "accuracy";
    case BaselineMetric::Mrr: return "mrr";
    case BaselineMetric::R1: return "r1";
    case BaselineMetric::R2: return "r2";
    case BaselineMetric::Ndcg: return "ndcg";
  }
  return "?";
}

double harmonic_mrr(std::size_t n) {
  double h = 0.0;
  for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
  return h / static_cast<double>(n);
}

BaselineEstimate random_baseline(std::span<const double> relevance, BaselineMetric metric,
                                 std::size_t trials, std::uint64_t seed) {
  if (trials == 0) throw std::invalid_argument("random_baseline: trials must be >= 1");
  if (relevance.empty()) throw std::invalid_argument("random_baseline: no candidates");
  Rng rng(seed);
  const std::size_t n = relevance.size();
  std::vector<double> scores(n);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (auto& s : scores) s = rng.uniform01();
    double v = 0.0;
    if (metric == BaselineMetric::Accuracy) {
      std::size_t wins = 0, total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!(relevance[i] > 0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) {
          if (relevance[j] > 0.0) continue;
          ++total;
          wins += scores[i] > scores[j];
        }
      }
      if (total == 0) throw std::invalid_argument("random_baseline: accuracy needs a positive and a negative");
      v = static_cast<double>(wins) / static_cast<double>(total);
    } else {
      const auto ranked = ranked_list(scores, relevance);
      switch (metric) {
        case BaselineMetric::Mrr: v = mrr(ranked); break;
        case BaselineMetric::R1: v = recall_at_k(ranked, 1); break;
        case BaselineMetric::R2: v = recall_at_k(ranked, std::min<std::size_t>(2, n)); break;
        case BaselineMetric::Ndcg: v = ndcg(ranked); break;
        default: break;
      }
    }
    sum += v;
    sum_sq += v * v;
  }
  BaselineEstimate est;
  est.trials = trials;
  est.mean = sum / static_cast<double>(trials);
  const double var = std::max(0.0, sum_sq / static_cast<double>(trials) - est.mean * est.mean);
  est.std_error = std::sqrt(var / static_cast<double>(trials));
  const auto relevant = static_cast<std::size_t>(
      std::count_if(relevance.begin(), relevance.end(), [](double r) { return r > 0.0; }));
  if (relevant == 1) {
    switch (metric) {
      case BaselineMetric::Mrr: est.closed_form = harmonic_mrr(n); break;
      case BaselineMetric::R1: est.closed_form = 1.0 / static_cast<double>(n); break;
      case BaselineMetric::R2:
        est.closed_form = std::min(2.0, static_cast<double>(n)) / static_cast<double>(n);
        break;
      case BaselineMetric::Accuracy: est.closed_form = 0.5; break;
      default: break;
    }
  }
  return est;
}

double quadratic_weighted_kappa(std::span<const int> a, std::span<const int> b,
                                int min_category, int max_category) {
  if (a.size() != b.size()) throw std::invalid_argument("kappa: unequal rating counts");
  if (a.empty()) throw std::invalid_argument("kappa: no rating pairs");
  if (max_category <= min_category) throw std::invalid_argument("kappa: need >= 2 categories");
  const auto K = static_cast<std::size_t>(max_category - min_category + 1);
  std::vector<double> obs(K * K, 0.0), ra(K, 0.0), rb(K, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < min_category || a[i] > max_category || b[i] < min_category ||
        b[i] > max_category)
      throw std::invalid_argument("kappa: rating outside category range");
    const auto x = static_cast<std::size_t>(a[i] - min_category);
    const auto y = static_cast<std::size_t>(b[i] - min_category);
    obs[x * K + y] += 1.0;
    ra[x] += 1.0;
    rb[y] += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double num = 0.0, den = 0.0;
  const double scale = static_cast<double>((K - 1) * (K - 1));
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      const double w = d * d / scale;
      num += w * obs[i * K + j] / n;
      den += w * (ra[i] / n) * (rb[j] / n);
    }
  if (den == 0.0) {
    if (num == 0.0) return 1.0;
    throw NumericError("kappa: zero expected disagreement");
  }
  return 1.0 - num / den;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson: need >= 2 paired values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw NumericError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

LeaveOneOut leave_one_out_correlation(const RatingMatrix& m) {
  if (m.empty()) throw std::invalid_argument("leave_one_out: no items");
  const std::size_t raters = m.front().size();
  if (raters < 2) throw std::invalid_argument("leave_one_out: need >= 2 raters");
  for (const auto& row : m)
    if (row.size() != raters) throw std::invalid_argument("leave_one_out: ragged matrix");
  LeaveOneOut out;
  for (std::size_t r = 0; r < raters; ++r) {
    std::vector<double> mine, others;
    for (const auto& row : m) {
      if (!row[r]) continue;
      double sum = 0.0;
      std::size_t cnt = 0;
      for (std::size_t q = 0; q < raters; ++q)
        if (q != r && row[q]) {
          sum += *row[q];
          ++cnt;
        }
      if (cnt == 0) continue;
      mine.push_back(*row[r]);
      others.push_back(sum / static_cast<double>(cnt));
    }
    if (mine.size() < 2)
      throw std::invalid_argument("leave_one_out: rater " + std::to_string(r) +
                                  " shares fewer than 2 items with the others");
    try {
      out.per_rater.push_back(pearson(mine, others));
    } catch (const NumericError&) {
      throw NumericError("leave_one_out: zero variance for rater " + std::to_string(r));
    }
  }
  out.mean = std::accumulate(out.per_rater.begin(), out.per_rater.end(), 0.0) /
             static_cast<double>(out.per_rater.size());
  return out;
}

double MetricSummary::mean() const {
  if (per_run.empty()) return 0.0;
  return std::accumulate(per_run.begin(), per_run.end(), 0.0) /
         static_cast<double>(per_run.size());
}

nlohmann::json metrics_json(const std::vector<MetricSummary>& metrics) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& m : metrics)
    j[m.name] = {{"mean", m.mean()}, {"per_run", m.per_run}, {"instances", m.instances}};
  return j;
}

std::string metrics_tsv(const std::vector<MetricSummary>& metrics) {
  std::ostringstream out;
  out.precision(10);
  out << "metric\tmean\tinstances\tper_run\n";
  for (const auto& m : metrics) {
    out << m.name << '\t' << m.mean() << '\t' << m.instances << '\t';
    for (std::size_t i = 0; i < m.per_run.size(); ++i) out << (i ? "," : "") << m.per_run[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace dcoh
