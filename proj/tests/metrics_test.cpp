#include <cmath>

#include "dcoh/common.hpp"
#include "dcoh/metrics.hpp"
#include "doctest.h"

using namespace dcoh;

namespace {

using V = std::vector<double>;

// Direct transcription of the quadratic-weighted kappa definition.
double kappa_oracle(const std::vector<int>& a, const std::vector<int>& b, int lo, int hi) {
  const int k = hi - lo + 1;
  const double n = static_cast<double>(a.size());
  std::vector<std::vector<double>> obs(k, std::vector<double>(k, 0.0));
  std::vector<double> ra(k, 0.0), rb(k, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    obs[a[i] - lo][b[i] - lo] += 1;
    ra[a[i] - lo] += 1;
    rb[b[i] - lo] += 1;
  }
  double num = 0, den = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double w = double((i - j) * (i - j)) / double((k - 1) * (k - 1));
      num += w * obs[i][j] / n;
      den += w * ra[i] * rb[j] / (n * n);
    }
  return 1.0 - num / den;
}

}  // namespace

TEST_CASE("nDCG examples") {
  // DCG = 3 + 1/log2(3) + 2/2 = 4.63093; IDCG = 3 + 2/log2(3) + 1/2 = 4.76186
  CHECK(ndcg(V{3, 1, 2}) == doctest::Approx(0.97250).epsilon(1e-5));
  CHECK(ndcg(V{1, 3}) == doctest::Approx((1 + 3 / std::log2(3.0)) / (3 + 1 / std::log2(3.0))));
  CHECK(ndcg(V{1, 3}) == doctest::Approx(0.796708).epsilon(1e-6));
  CHECK(ndcg(V{3, 2, 1}) == doctest::Approx(1.0));
  CHECK(ndcg(V{2.6, 1.8, 1.8, 1.3}) == doctest::Approx(1.0));
}

TEST_CASE("exponential-gain nDCG") {
  // gains 7, 1, 3: DCG = 7 + 1/log2(3) + 3/2; IDCG = 7 + 3/log2(3) + 1/2
  const double l3 = std::log2(3.0);
  CHECK(ndcg(V{3, 1, 2}, GainMode::Exponential) ==
        doctest::Approx((7 + 1 / l3 + 1.5) / (7 + 3 / l3 + 0.5)));
  CHECK(ndcg(V{3, 2, 1}, GainMode::Exponential) == doctest::Approx(1.0));
  CHECK(parse_gain_mode("exponential") == GainMode::Exponential);
  CHECK_THROWS_AS(parse_gain_mode("log"), std::invalid_argument);
}

TEST_CASE("nDCG stays within [0, 1] and peaks at the ideal order") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    V g(1 + rng.uniform_index(8));
    for (auto& x : g) x = 1 + std::floor(rng.uniform01() * 3);
    const double v = ndcg(g);
    CHECK(v > 0);
    CHECK(v <= 1 + 1e-12);
    V sorted = g;
    std::sort(sorted.rbegin(), sorted.rend());
    CHECK(ndcg(sorted) == doctest::Approx(1.0));
  }
}

TEST_CASE("MRR, recall and the tie rule") {
  CHECK(mrr(V{0, 0, 1, 0}) == doctest::Approx(1.0 / 3));
  CHECK(mrr(V{1, 0}) == 1.0);
  CHECK_THROWS_AS(mrr(V{0, 0}), std::invalid_argument);
  CHECK(recall_at_k(V{0, 1, 0}, 1) == 0.0);
  CHECK(recall_at_k(V{0, 1, 0}, 2) == 1.0);

  // positive tied with one negative below another: placed after both
  const V scores{0.5, 0.9, 0.5}, rel{1, 0, 0};
  CHECK(rank_order(scores, rel) == std::vector<std::size_t>{1, 2, 0});
  CHECK(mrr(ranked_list(scores, rel)) == doctest::Approx(1.0 / 3));
  const V all_tied{0.0, 0.0, 0.0};
  CHECK(mrr(ranked_list(all_tied, rel)) == doctest::Approx(1.0 / 3));
  CHECK(ndcg(ranked_list(V{1, 1}, V{3, 1})) == doctest::Approx(0.796708).epsilon(1e-6));
}

TEST_CASE("pairwise accuracy") {
  CHECK(pairwise_accuracy(0.5, V{0.9, 0.5, 0.1}) == doctest::Approx(1.0 / 3));
  CHECK(pairwise_accuracy(1.0, V{0.2, 0.3}) == 1.0);
  CHECK(pairwise_accuracy(0.0, V{0.0, 0.0}) == 0.0);

  const auto pc = rated_pair_accuracy(V{3, 1, 2, 2}, V{3, 1, 2, 2});
  CHECK(pc.total == 5);
  CHECK(pc.correct == 5);
  const auto flat = rated_pair_accuracy(V{0, 0, 0}, V{3, 1, 2});
  CHECK(flat.total == 3);
  CHECK(flat.correct == 0);
}

TEST_CASE("dynamic relevance") {
  CHECK(dynamic_relevance(V{2.6, 1.8, 2.6, 1.0}) == V{1, 0, 1, 0});
  CHECK(dynamic_relevance(V{2.0}) == V{1});
}

TEST_CASE("random baseline matches closed forms") {
  V rel(10, 0.0);
  rel[0] = 1;
  const auto m = random_baseline(rel, BaselineMetric::Mrr, 100000, 1);
  CHECK(harmonic_mrr(10) == doctest::Approx(0.29290).epsilon(1e-4));
  CHECK(m.closed_form.value() == doctest::Approx(harmonic_mrr(10)));
  CHECK(std::abs(m.mean - 0.2929) < 4 * m.std_error + 1e-3);
  CHECK(m.trials == 100000);

  const auto r2 = random_baseline(rel, BaselineMetric::R2, 100000, 2);
  CHECK(r2.mean == doctest::Approx(0.2).epsilon(0.02));
  const auto acc = random_baseline(rel, BaselineMetric::Accuracy, 100000, 3);
  CHECK(acc.mean == doctest::Approx(0.5).epsilon(0.01));

  const auto again = random_baseline(rel, BaselineMetric::Mrr, 1000, 7);
  CHECK(again.mean == random_baseline(rel, BaselineMetric::Mrr, 1000, 7).mean);
  CHECK(parse_baseline_metric("r1") == BaselineMetric::R1);
  CHECK_THROWS(parse_baseline_metric("bogus"));
}

TEST_CASE("quadratic weighted kappa") {
  const std::vector<int> a{1, 2, 3, 1, 2, 3, 2, 2};
  CHECK(quadratic_weighted_kappa(a, a) == doctest::Approx(1.0));

  const std::vector<int> x{1, 1, 3, 3}, y{3, 3, 1, 1};
  CHECK(quadratic_weighted_kappa(x, y) == doctest::Approx(kappa_oracle(x, y, 1, 3)));
  CHECK(quadratic_weighted_kappa(x, y) == doctest::Approx(-1.0));

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> p(30), q(30);
    for (auto& v : p) v = 1 + static_cast<int>(rng.uniform_index(3));
    for (auto& v : q) v = 1 + static_cast<int>(rng.uniform_index(3));
    const double k = quadratic_weighted_kappa(p, q);
    CHECK(k == doctest::Approx(kappa_oracle(p, q, 1, 3)));
    CHECK(k == doctest::Approx(quadratic_weighted_kappa(q, p)));
  }

  std::vector<int> p(20000), q(20000);
  for (auto& v : p) v = 1 + static_cast<int>(rng.uniform_index(3));
  for (auto& v : q) v = 1 + static_cast<int>(rng.uniform_index(3));
  CHECK(std::abs(quadratic_weighted_kappa(p, q)) < 0.05);

  const std::vector<int> c{2, 2, 2};
  CHECK(quadratic_weighted_kappa(c, c) == 1.0);
  CHECK(quadratic_weighted_kappa(c, std::vector<int>{2, 2, 3}) == doctest::Approx(0.0));
  CHECK_THROWS(quadratic_weighted_kappa(std::vector<int>{1, 4}, std::vector<int>{1, 2}));
}

TEST_CASE("leave-one-out correlation") {
  RatingMatrix m{{1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  const auto l = leave_one_out_correlation(m);
  REQUIRE(l.per_rater.size() == 3);
  for (double r : l.per_rater) CHECK(r == doctest::Approx(1.0));

  RatingMatrix anti{{1, 3}, {2, 2}, {3, 1}};
  CHECK(leave_one_out_correlation(anti).mean == doctest::Approx(-1.0));

  RatingMatrix missing{{1, 1, std::nullopt}, {2, 2, 3}, {3, 3, 1}, {1, std::nullopt, 2}};
  const auto lm = leave_one_out_correlation(missing);
  CHECK(lm.per_rater[0] == doctest::Approx(pearson(V{1, 2, 3, 1}, V{1, 2.5, 2, 2})));
  CHECK(pearson(V{1, 2, 3}, V{2, 4, 6}) == doctest::Approx(1.0));
}

TEST_CASE("metric summaries") {
  std::vector<MetricSummary> s{{"mrr", {0.5, 0.7}, 10}, {"r@1", {0.25}, 10}};
  CHECK(s[0].mean() == doctest::Approx(0.6));
  const auto j = metrics_json(s);
  CHECK(j.dump().find("mrr") != std::string::npos);
  const auto tsv = metrics_tsv(s);
  CHECK(tsv.find("mrr") != std::string::npos);
  CHECK(split_lines(tsv).size() >= 3);
}
